"""Moderate- and large-deviation rate functions from the spectral data.

The moderate scale is governed by the quadratic form built on the maximizing
dual-torus point of <y, D(p) y>; the large-deviation generating function is
Lambda_bar(y) = -y.rbar + ln lambda1(-iy, p1(y)) on the ball where the tilted
branch can be continued, with the linear envelope c0 |y| outside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import HypothesisUnmetError
from .model import WalkModel
from . import evolution, spectral, transfer


# ---------------------------------------------------------------------------
# moderate deviations


@dataclass
class QuadraticFormResult:
    value: float            # (1/2) <y, D(p1) y>
    maximizer: np.ndarray
    constant: bool
    hessian_definite: bool


class _DiffusionField:
    """D(p) evaluated on a cached dual-torus grid, with local refinement."""

    def __init__(self, model: WalkModel, p_grid: int = 8):
        self.model = model
        self.ps = transfer.torus_grid(model, p_grid)
        self.mats = [spectral.diffusion_matrix_analytic(model, p) for p in self.ps]
        spread = max(float(np.max(np.abs(m - self.mats[0]))) for m in self.mats)
        scale = max(1.0, float(np.max(np.abs(self.mats[0]))))
        self.constant = spread <= 1e-9 * scale
        self.step = 2 * np.pi / p_grid

    def quadratic(self, y) -> QuadraticFormResult:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if not y.any():
            return QuadraticFormResult(0.0, self.ps[0].copy(), self.constant, True)
        vals = np.array([float(y @ m @ y) for m in self.mats])
        if self.constant:
            return QuadraticFormResult(0.5 * float(vals[0]), self.ps[0].copy(), True, True)
        best = int(np.argmax(vals))
        p0 = self.ps[best]

        def neg(p):
            return -float(y @ spectral.diffusion_matrix_analytic(self.model, p) @ y)

        res = scipy.optimize.minimize(neg, p0, method="Nelder-Mead",
                                      options={"xatol": 1e-8, "fatol": 1e-12})
        p1 = res.x
        g1 = -res.fun
        # fitted Hessian of the quadratic form at the maximizer
        h = self.step / 8
        d = self.model.d
        H = np.empty((d, d))
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h
            H[i, i] = (-neg(p1 + ei) + 2 * res.fun - neg(p1 - ei)) / h**2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = h
                H[i, j] = (-neg(p1 + ei + ej) + neg(p1 + ei - ej)
                           + neg(p1 - ei + ej) - neg(p1 - ei - ej)) / (4 * h**2)
                H[j, i] = H[i, j]
        definite = bool(np.max(np.linalg.eigvalsh(H)) < 1e-8)
        if not definite:
            raise HypothesisUnmetError(
                "non-constant quadratic form has a degenerate maximizer; the "
                "moderate-deviation hypothesis (non-degenerate maxima) fails"
            )
        return QuadraticFormResult(0.5 * g1, p1, False, definite)


def moderate_quadratic(model: WalkModel, y, p_grid: int = 8) -> QuadraticFormResult:
    """Limiting scaled cumulant on the moderate scale: (1/2) <y, D(p1(y)) y>."""
    return _DiffusionField(model, p_grid).quadratic(y)


@dataclass
class RateFunctionSample:
    mode: str
    x_grid: list
    values: list
    y_domain: dict
    maximizers: list = field(default_factory=list)
    valid: list = field(default_factory=list)
    gradient_norms: list = field(default_factory=list)

    def as_dict(self):
        return {
            "mode": self.mode,
            "x_grid": [list(np.atleast_1d(x)) for x in self.x_grid],
            "values": self.values,
            "y_domain": self.y_domain,
            "maximizers": [list(np.atleast_1d(m)) for m in self.maximizers],
            "valid": self.valid,
            "gradient_norms": self.gradient_norms,
        }


def _sup_over_box(objective, d, half_width, coarse=9):
    """Coarse grid + Nelder-Mead refinement of a concave-ish objective on a box."""
    axes = [np.linspace(-half_width, half_width, coarse)] * d
    best_y, best_v = np.zeros(d), objective(np.zeros(d))
    for idx in np.ndindex(*([coarse] * d)):
        y = np.array([axes[j][idx[j]] for j in range(d)])
        v = objective(y)
        if v > best_v:
            best_y, best_v = y, v
    res = scipy.optimize.minimize(lambda y: -objective(y), best_y, method="Nelder-Mead",
                                  options={"xatol": 1e-9, "fatol": 1e-12})
    return res.x, -res.fun


def moderate_rate_function(model: WalkModel, x_grid, y_half_width: float = 8.0,
                           p_grid: int = 8) -> RateFunctionSample:
    """Legendre transform of the moderate quadratic over a dual box.

    A supremum landing on the box boundary enlarges the box once; if it still
    sits on the boundary the transform is declared divergent for that x.
    """
    field_ = _DiffusionField(model, p_grid)
    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_grid]
    values, maximizers, valid = [], [], []
    for x in xs:
        width = y_half_width
        for attempt in range(2):
            y_star, val = _sup_over_box(
                lambda y: float(np.dot(y, x)) - field_.quadratic(y).value,
                model.d, width)
            on_boundary = np.max(np.abs(y_star)) >= 0.98 * width
            if not on_boundary:
                break
            width *= 2
        if on_boundary:
            raise HypothesisUnmetError(
                f"Legendre supremum for x={x} escapes the dual box even after "
                f"enlargement to half-width {width}"
            )
        values.append(float(val))
        maximizers.append(y_star)
        valid.append(True)
    return RateFunctionSample("moderate", xs, values,
                              {"half_width": y_half_width}, maximizers, valid,
                              [0.0] * len(xs))


# ---------------------------------------------------------------------------
# large deviations


@dataclass
class LambdaBarResult:
    value: float
    y: np.ndarray
    maximizer_p: np.ndarray
    lambda_value: complex
    gradient_norm: float
    valid: bool
    constant_in_p: bool


def large_dev_lambda_bar(model: WalkModel, y, p_grid: int = 8,
                         grad_tol: float = 1e-6) -> LambdaBarResult:
    """Scaled cumulant generating function at real y via the tilted branch.

    Maximizes |lambda1(-iy, p)| over the dual grid, refines unless the field is
    constant, and verifies the stationarity hypothesis grad_p lambda1 = 0 at
    the maximizer; a nonzero gradient flags the value instead of aborting.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rbar = spectral.drift(model)
    if not y.any():
        p0 = transfer.torus_grid(model, p_grid)[0]
        return LambdaBarResult(0.0, y, p0, 1.0 + 0j, 0.0, True, True)
    k = -1j * y

    def lam(p):
        return spectral.lambda1(model, k, p)

    ps = transfer.torus_grid(model, p_grid)
    vals = np.array([abs(lam(p)) for p in ps])
    spread = float(vals.max() - vals.min())
    constant = spread <= 1e-10 * max(1.0, vals.max())
    if constant:
        p1 = ps[0]
    else:
        p0 = ps[int(np.argmax(vals))]
        res = scipy.optimize.minimize(lambda p: -abs(lam(p)), p0, method="Nelder-Mead",
                                      options={"xatol": 1e-9, "fatol": 1e-13})
        p1 = res.x
    lam1 = lam(p1)
    hp = 1e-5
    grad = np.empty(model.d, dtype=complex)
    for j in range(model.d):
        e = np.zeros(model.d)
        e[j] = hp
        grad[j] = (lam(p1 + e) - lam(p1 - e)) / (2 * hp)
    gnorm = float(np.linalg.norm(grad))
    logval = np.log(lam1)
    valid = gnorm < grad_tol and abs(logval.imag) < 1e-8 and lam1.real > 0
    value = float(-np.dot(y, rbar) + logval.real)
    return LambdaBarResult(value, y, np.atleast_1d(p1), lam1, gnorm, bool(valid), constant)


def lambda_bar_bruteforce(model: WalkModel, y, n: int, budget: int = 10**6) -> float:
    """(1/n) ln E(e^{y.(X_n - n rbar)}) from the exact path-enumerated law."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rbar = spectral.drift(model)
    dist = evolution.averaged_distribution_bruteforce(model, n, budget)
    acc = sum(pr * np.exp(float(np.dot(y, np.array(k) - n * rbar))) for k, pr in dist.items())
    return float(np.log(acc) / n)


def envelope_constant(model: WalkModel) -> float:
    """c0 with |Lambda_bar(y)| <= c0 |y|: the reach of (X_n - n rbar)/n."""
    return float(np.sqrt(model.d) * model.jump.rho + np.linalg.norm(spectral.drift(model)))


def large_rate_function(model: WalkModel, x_grid, kappa: float | None = None,
                        p_grid: int = 8, y_points: int = 21) -> RateFunctionSample:
    """Legendre transform of Lambda_bar over the continuable ball B(0, kappa).

    Outside the ball only the linear envelope c0 |y| is known, so x with
    |x| > c0 gets an infinite rate; interior suprema landing on the ball
    boundary are flagged as not valid rather than extrapolated.
    """
    if kappa is None:
        kappa = spectral.continuation_radius(model, imaginary=True)
    c0 = envelope_constant(model)
    hess = clt_hessian(model, p_grid=p_grid)[0]
    strictly_convex = bool(np.min(np.linalg.eigvalsh(hess)) > 1e-10)

    cache: dict = {}

    def lbar(yv) -> LambdaBarResult:
        key = tuple(np.round(yv, 12))
        if key not in cache:
            cache[key] = large_dev_lambda_bar(model, yv, p_grid)
        return cache[key]

    xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in x_grid]
    values, maximizers, valid, gnorms = [], [], [], []
    for x in xs:
        if np.linalg.norm(x) > c0:
            values.append(float("inf"))
            maximizers.append(np.full(model.d, np.nan))
            valid.append(True)  # the walk provably cannot reach beyond c0
            gnorms.append(0.0)
            continue
        # radial candidate set inside the ball
        best_v, best_y = 0.0, np.zeros(model.d)
        if model.d == 1:
            ys = [np.array([s]) for s in np.linspace(-0.95 * kappa, 0.95 * kappa, y_points)]
        else:
            rng = np.random.default_rng(0)
            ys = [np.zeros(model.d)]
            for _ in range(y_points * model.d):
                u = rng.normal(size=model.d)
                u /= np.linalg.norm(u)
                ys.append(rng.uniform(0, 0.95 * kappa) * u)
        for yv in ys:
            r = lbar(yv)
            v = float(np.dot(yv, x)) - r.value
            if v > best_v:
                best_v, best_y = v, yv

        def neg(yv):
            if np.linalg.norm(yv) >= kappa:
                return np.inf
            return -(float(np.dot(yv, x)) - lbar(yv).value)

        res = scipy.optimize.minimize(neg, best_y, method="Nelder-Mead",
                                      options={"xatol": 1e-8, "fatol": 1e-12})
        y_star = res.x if np.isfinite(res.fun) else best_y
        val = -res.fun if np.isfinite(res.fun) else best_v
        rep = lbar(y_star)
        on_boundary = np.linalg.norm(y_star) >= 0.9 * kappa
        values.append(float(max(val, 0.0)))
        maximizers.append(np.atleast_1d(y_star))
        valid.append(bool(rep.valid and strictly_convex and not on_boundary))
        gnorms.append(rep.gradient_norm)
    return RateFunctionSample("large", xs, values,
                              {"kappa": kappa, "c0": c0, "strictly_convex": strictly_convex},
                              maximizers, valid, gnorms)


def clt_hessian(model: WalkModel, h: float = 5e-3, p_grid: int = 8,
                warn_tol: float = 1e-4):
    """Hessian of Lambda_bar at 0 by central differences, Richardson once.

    Under the gap hypothesis this is the central-limit covariance; for
    p-independent diffusion it must agree with the averaged diffusion matrix.
    """
    d = model.d

    def lb(yv):
        return large_dev_lambda_bar(model, yv, p_grid).value

    def hess(hh):
        H = np.empty((d, d))
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = hh
            H[i, i] = (lb(ei) + lb(-ei)) / hh**2  # Lambda_bar(0) = 0
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = hh
                H[i, j] = (lb(ei + ej) - lb(ei - ej) - lb(-ei + ej) + lb(-ei - ej)) / (4 * hh**2)
                H[j, i] = H[i, j]
        return H

    H1 = hess(h)
    H2 = hess(h / 2)
    rich = (4 * H2 - H1) / 3
    disagreement = float(np.max(np.abs(H1 - H2))) / max(1.0, float(np.max(np.abs(rich))))
    return rich, disagreement
