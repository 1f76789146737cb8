import numpy as np
import pytest

from mqwalk import deviations as dv
from mqwalk import spectral as sp

from conftest import flip_model, skew_model, xz_model


def flip_lambda_bar_closed_form(q, y):
    """Scalar oracle: ln of the Perron root of the tilted two-state chain."""
    a = q * np.cosh(y)
    det = 2 * q - 1
    return float(np.log(a + np.sqrt(a * a - det)))


# ---------------------------------------------------------------------------
# moderate deviations


def test_moderate_quadratic_zero(flip03):
    assert dv.moderate_quadratic(flip03, [0.0]).value == 0.0


def test_moderate_quadratic_constant_field():
    m = xz_model()
    D = sp.diffusion_matrix_analytic(m, m.site.coordinate_map @ np.array([0.3]))
    for y in (0.4, 1.3):
        res = dv.moderate_quadratic(m, [y])
        assert res.constant
        assert res.value == pytest.approx(0.5 * D[0, 0] * y * y, abs=1e-10)


def test_moderate_quadratic_flip_closed_form():
    q = 0.3
    m = flip_model(q)
    res = dv.moderate_quadratic(m, [0.7])
    assert res.value == pytest.approx(0.5 * (q / (1 - q)) * 0.49, abs=1e-9)


def test_moderate_rate_function_quadratic_dual():
    # constant D: the transform must return (1/2) <x, D^{-1} x>
    m = flip_model(0.3)
    D = 0.3 / 0.7
    xs = [[x] for x in np.linspace(-1.0, 1.0, 9)]
    sample = dv.moderate_rate_function(m, xs)
    for x, v in zip(xs, sample.values):
        assert v == pytest.approx(0.5 * x[0] ** 2 / D, abs=1e-6)
    assert sample.values[4] == pytest.approx(0.0, abs=1e-8)


def test_moderate_rate_function_convex_midpoints():
    m = xz_model()
    xs = [[-0.6], [-0.3], [0.0], [0.3], [0.6]]
    vals = dv.moderate_rate_function(m, xs).values
    for a, b, c in zip(vals[:-2], vals[1:-1], vals[2:]):
        assert b <= 0.5 * (a + c) + 1e-8
    assert min(vals) >= -1e-10


# ---------------------------------------------------------------------------
# large deviations


def test_lambda_bar_zero(flip03):
    assert dv.large_dev_lambda_bar(flip03, [0.0]).value == 0.0


@pytest.mark.parametrize("q", [0.25, 0.5, 0.75])
def test_lambda_bar_flip_closed_form(q):
    m = flip_model(q)
    for y in (0.1, 0.3, -0.2):
        res = dv.large_dev_lambda_bar(m, [y])
        assert res.valid
        assert res.value == pytest.approx(flip_lambda_bar_closed_form(q, y), abs=1e-9)


def test_lambda_bar_envelope_bound():
    m = skew_model()
    c0 = dv.envelope_constant(m)
    assert c0 == pytest.approx(2.5)
    for y in (0.05, 0.1):
        res = dv.large_dev_lambda_bar(m, [y])
        assert abs(res.value) <= c0 * abs(y) + 1e-12


def test_lambda_bar_gradient_validity_flag(flip03):
    res = dv.large_dev_lambda_bar(flip03, [0.2])
    assert res.valid
    assert res.gradient_norm < 1e-6


def test_lambda_bar_bruteforce_trend():
    m = flip_model(0.3)
    y = 0.25
    target = flip_lambda_bar_closed_form(0.3, y)
    b8 = dv.lambda_bar_bruteforce(m, [y], 8)
    b10 = dv.lambda_bar_bruteforce(m, [y], 10)
    assert abs(b10 - target) < abs(b8 - target)


def test_large_rate_function_flip_vs_scalar_oracle():
    q = 0.5
    m = flip_model(q)
    xs = [[0.0], [0.1], [0.2]]
    sample = dv.large_rate_function(m, xs, p_grid=4)
    # independent scalar implementation of the same Legendre transform
    ys = np.linspace(-0.99 * sample.y_domain["kappa"], 0.99 * sample.y_domain["kappa"], 801)
    for x, v, ok in zip(xs, sample.values, sample.valid):
        oracle = max(y * x[0] - flip_lambda_bar_closed_form(q, y) for y in ys)
        assert v == pytest.approx(max(oracle, 0.0), abs=1e-5)
        assert ok


def test_large_rate_function_infinite_outside_reach():
    m = flip_model(0.4)
    sample = dv.large_rate_function(m, [[2.0]], p_grid=4)
    assert sample.values[0] == float("inf")


def test_large_rate_small_x_quadratic_match():
    # near the origin the rate is (1/2) x^2 / D with D the CLT Hessian
    q = 0.5
    m = flip_model(q)
    H, _ = dv.clt_hessian(m, p_grid=4)
    x = 0.05
    sample = dv.large_rate_function(m, [[x]], p_grid=4)
    quad = 0.5 * x * x / H[0, 0]
    assert abs(sample.values[0] - quad) / quad < 0.05


def test_rate_functions_nonnegative_and_zero_at_origin():
    m = flip_model(0.3)
    s1 = dv.moderate_rate_function(m, [[0.0], [0.4]])
    s2 = dv.large_rate_function(m, [[0.0], [0.1]], p_grid=4)
    assert s1.values[0] == pytest.approx(0.0, abs=1e-8)
    assert s2.values[0] == pytest.approx(0.0, abs=1e-8)
    assert all(v >= -1e-10 for v in s1.values + s2.values)


# ---------------------------------------------------------------------------
# CLT Hessian


@pytest.mark.parametrize("q,want", [(0.25, 1 / 3), (0.75, 3.0)])
def test_clt_hessian_flip(q, want):
    m = flip_model(q)
    H, disagreement = dv.clt_hessian(m, p_grid=4)
    assert H[0, 0] == pytest.approx(want, abs=1e-6)
    assert disagreement < 1e-4


def test_clt_hessian_matches_averaged_diffusion_for_certified():
    m = xz_model()
    H, _ = dv.clt_hessian(m, p_grid=4)
    Dbar = sp.averaged_diffusion(m, grid_size=4)
    assert abs(H[0, 0] - Dbar[0, 0]) < 1e-5


def test_lambda_bar_even_for_symmetric_model():
    # symmetric jumps and chain: odd part of Lambda_bar vanishes near 0
    m = flip_model(0.35)
    for y in (0.05, 0.12):
        a = dv.large_dev_lambda_bar(m, [y]).value
        b = dv.large_dev_lambda_bar(m, [-y]).value
        assert abs(a - b) < 1e-9


def test_legendre_involution_on_moderate_quadratic():
    # transform twice: recover the quadratic on interior points
    import scipy.optimize

    m = flip_model(0.3)
    D = 0.3 / 0.7

    def rate_fn(x):
        return dv.moderate_rate_function(m, [[x]]).values[0]

    for y in (0.3, 0.6):
        # sup_x (xy - rate(x)) should recover (1/2) D y^2
        res = scipy.optimize.minimize(lambda x: -(x[0] * y - rate_fn(x[0])), [D * y * 1.2],
                                      method="Nelder-Mead", options={"xatol": 1e-9})
        assert -res.fun == pytest.approx(0.5 * D * y * y, abs=1e-5)
