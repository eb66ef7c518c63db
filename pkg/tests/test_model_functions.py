import numpy as np
import pytest

from fieldsense.errors import SingularEvaluationError
from fieldsense.model_functions import (
    Const,
    Constant,
    Coordinate,
    InverseDistance,
    ModelSpec,
    Monomial,
    Polynomial,
    Product,
    Sinusoid,
    Sum,
    as_field,
    function_from_json,
)
from fieldsense.multiindex import box_lower_set


def fd_oracle(f, zeta, x):
    """Nested central differences, written independently of the library's fallback.

    Step tuned to the total order (eps^(1/(order+2))) so roundoff from the
    nested quotients stays far below the comparison tolerance.
    """
    zeta = tuple(zeta)
    order = sum(zeta)
    if order == 0:
        return f.eval(x)
    h = float(np.finfo(float).eps) ** (1.0 / (order + 2)) * max(1.0, np.max(np.abs(x)))
    j = next(i for i, z in enumerate(zeta) if z)
    reduced = zeta[:j] + (zeta[j] - 1,) + zeta[j + 1 :]

    def value(point):
        if sum(reduced) == 0:
            return f.eval(point)
        return fd_oracle(f, reduced, point)

    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[j] += h
    xm[j] -= h
    return (value(xp) - value(xm)) / (2 * h)


def test_eval_examples():
    assert Monomial((2, 1)).eval([3.0, 2.0]) == 18.0
    assert InverseDistance((0.0, 0.0), 1.0).eval([3.0, 4.0]) == pytest.approx(0.2)
    assert Constant().eval([123.0]) == 1.0


def test_derivative_examples():
    assert Monomial((2, 0)).eval_derivative((1, 0), [3.0, 0.0]) == 6.0
    f = InverseDistance((0.0, 0.0), 1.0)
    assert f.eval_derivative((0, 0), [3.0, 4.0]) == f.eval([3.0, 4.0])
    # cross derivative of x*y is 1 everywhere
    xy = Monomial((1, 1))
    assert xy.eval_derivative((1, 1), [2.7, -1.3]) == 1.0
    assert fd_oracle(xy, (1, 1), [2.7, -1.3]) == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("f", [
    Monomial((2, 1, 0)),
    Monomial((0, 3, 1)),
    InverseDistance((0.1, -0.2, 0.3), 1.0),
    InverseDistance((0.1, -0.2, 0.3), 2.0),
    Sinusoid((1.3, -0.7, 0.4), 0.2, "sin"),
    Sinusoid((0.5, 1.1, -0.9), -0.4, "cos"),
    Constant(),
])
def test_closed_forms_match_finite_differences(f):
    rng = np.random.default_rng(5)
    zetas = [
        (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
        (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1),
    ]
    for _ in range(5):
        x = rng.uniform(1.0, 2.0, size=3)
        for zeta in zetas:
            exact = f.eval_derivative(zeta, x)
            approx = fd_oracle(f, zeta, x)
            scale = max(1.0, abs(exact))
            assert abs(exact - approx) <= 1e-6 * scale


def test_sinusoid_high_order_derivatives():
    f = Sinusoid((2.0, 3.0), 0.1, "cos")
    x = np.array([0.3, -0.2])
    # fourth derivative in x1: factor 2^4, phase shifted by 2*pi
    assert f.eval_derivative((4, 0), x) == pytest.approx(16.0 * f.eval(x), rel=1e-12)


def test_inverse_distance_singularity():
    f = InverseDistance((1.0, 1.0), 1.0)
    with pytest.raises(SingularEvaluationError):
        f.eval([1.0, 1.0])
    with pytest.raises(SingularEvaluationError):
        f.eval([1.0 + 1e-13, 1.0])


def test_expression_tree_eval_and_fd_derivative():
    # (x - 1)^3 as a product of sums
    xm1 = Sum((Coordinate(0), Const(-1.0)))
    cube = Product((xm1, xm1, xm1))
    assert cube.eval([3.0, 0.0]) == pytest.approx(8.0)
    # fallback derivative: d/dx (x-1)^3 = 3 (x-1)^2
    assert cube.eval_derivative((1, 0), [3.0, 0.0]) == pytest.approx(12.0, rel=1e-7)


def test_polynomial_exact_derivatives():
    field = Polynomial(((1.0, (3, 0)), (1.0, (0, 3))), shift=(1.0, 1.0))
    assert field.eval([2.0, 0.0]) == pytest.approx(0.0)
    assert field.eval_derivative((1, 0), [2.0, 0.0]) == pytest.approx(3.0)
    assert field.eval_derivative((2, 0), [2.0, 0.0]) == pytest.approx(6.0)
    assert field.eval_derivative((1, 1), [2.0, 0.0]) == 0.0
    assert fd_oracle(field, (2, 0), [2.0, 0.0]) == pytest.approx(6.0, rel=1e-5)


def test_monomial_reproduces_vandermonde_entry():
    L = box_lower_set(2, 2)
    point = np.array([2.0, 3.0])
    for alpha in L:
        assert Monomial(alpha).eval(point) == point[0] ** alpha[0] * point[1] ** alpha[1]


def test_model_spec_and_json_round_trip():
    spec = ModelSpec(
        (
            Constant(),
            Monomial((1, 0)),
            InverseDistance((0.5, 0.5), 1.0),
            Sinusoid((1.0, 2.0), 0.3, "cos"),
            Sum((Const(2.0), Coordinate(1))),
        ),
        dim=2,
    )
    again = ModelSpec.from_json(spec.to_json(), dim=2)
    x = np.array([0.1, 0.9])
    for f, g in zip(spec, again):
        assert f.eval(x) == g.eval(x)
    with pytest.raises(ValueError):
        ModelSpec((), dim=2)
    with pytest.raises(ValueError):
        function_from_json({"kind": "nope"})


def test_as_field_wraps_callables():
    fld = as_field(lambda x: float(x[0] ** 2))
    assert fld.eval([3.0]) == 9.0
    assert fld.eval_derivative((1,), [3.0]) == pytest.approx(6.0, rel=1e-7)
    with pytest.raises(TypeError):
        as_field(42)
