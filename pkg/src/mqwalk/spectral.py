"""Spectral data of the fiber operator: gap checks, the tracked top branch,
the reduced resolvent, drift and diffusion matrices.

Conventions.  The tracked eigenvalue branch lambda1(k, p) equals 1 at k=0 and
expands as 1 + i k.rbar - (1/2) <k, D(p) k> + O(k^3); both diffusion routes
below compute the same D(p) = -Hess_k lambda1(0, p), once from the explicit
reduced-resolvent quadratic form and once by finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BranchCollisionError, SpectralError
from .model import WalkModel
from . import transfer
from .util import derive_rng, parallel_map

EIG_RESIDUAL_TOL = 1e-8


# ---------------------------------------------------------------------------
# dense eigensolves and assumption checks


def full_spectrum(matrix: np.ndarray):
    """All eigenvalues, with a backward-error residual check per pair."""
    ev, vecs = scipy.linalg.eig(matrix)
    scale = max(1.0, float(np.linalg.norm(matrix, 2)))
    for i in range(len(ev)):
        res = np.linalg.norm(matrix @ vecs[:, i] - ev[i] * vecs[:, i])
        if res > EIG_RESIDUAL_TOL * scale:
            raise SpectralError(
                f"eigenpair residual {res:.2e} exceeds tolerance; matrix dump:\n{matrix}"
            )
    return ev


@dataclass
class AssumptionSPointReport:
    p: list
    has_one: bool
    simple: bool
    gap_ok: bool
    gap: float

    @property
    def ok(self):
        return self.has_one and self.simple and self.gap_ok


@dataclass
class AssumptionSReport:
    entries: list
    delta_floor: float
    restricted: bool = False

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    @property
    def min_gap(self) -> float:
        return min((e.gap for e in self.entries), default=float("nan"))

    def as_dict(self):
        return {
            "passed": self.passed,
            "min_gap": self.min_gap,
            "delta_floor": self.delta_floor,
            "restricted": self.restricted,
            "points": [
                {"p": e.p, "has_one": e.has_one, "simple": e.simple,
                 "gap_ok": e.gap_ok, "gap": e.gap}
                for e in self.entries
            ],
        }


def _cyclic_restriction(matrix: np.ndarray, start: np.ndarray, rank_tol: float = 1e-10):
    """Orthonormal basis of the Krylov closure of `start` under `matrix`,
    and the restriction of `matrix` to it."""
    basis = [start / np.linalg.norm(start)]
    while True:
        w = matrix @ basis[-1]
        for b in basis:
            w = w - np.vdot(b, w) * b
        nw = np.linalg.norm(w)
        if nw <= rank_tol:
            break
        basis.append(w / nw)
        if len(basis) == matrix.shape[0]:
            break
    B = np.stack(basis, axis=1)
    return B, B.conj().T @ matrix @ B


def _point_report(model, p, delta_floor, restricted) -> AssumptionSPointReport:
    op = transfer.build_fiber_operator(model, np.zeros(model.d), p)
    if restricted:
        adj = op.weighted_adjoint_matrix()
        _, mat = _cyclic_restriction(adj, transfer.delta_identity(model))
        ev = full_spectrum(mat).conj()
    else:
        ev = full_spectrum(op.matrix)
    near_one = np.abs(ev - 1) < 1e-10
    has_one = bool(near_one.any())
    rest = ev[~near_one] if has_one else ev
    if has_one:
        # second-closest eigenvalue to 1 must stay away from it
        dist_to_one = np.sort(np.abs(ev - 1))
        simple = int(near_one.sum()) == 1 and (len(ev) == 1 or dist_to_one[1] > delta_floor)
    else:
        simple = False
    gap = float(1 - np.max(np.abs(rest))) if rest.size else 1.0
    gap_ok = gap > delta_floor
    return AssumptionSPointReport(list(np.atleast_1d(p)), has_one, simple, gap_ok, gap)


def check_assumption_S(model: WalkModel, p_grid: int = 16, delta_floor: float = 1e-6,
                       restricted: bool = False, threads: int = 1) -> AssumptionSReport:
    """Gap hypothesis on a dual-torus grid: eigenvalue 1 present and simple,
    no other spectrum within delta_floor of the unit circle.

    With restricted=True the operator is first compressed to the cyclic
    subspace generated by delta_0 (x) Id under repeated adjoint application.
    """
    ps = transfer.torus_grid(model, p_grid)
    entries = parallel_map(lambda p: _point_report(model, p, delta_floor, restricted),
                           ps, threads)
    return AssumptionSReport(entries, delta_floor, restricted)


# ---------------------------------------------------------------------------
# tracked top branch


@dataclass
class Branch:
    value: complex
    right: np.ndarray
    left: np.ndarray  # left eigenvector in the plain metric: left^H M = value * left^H

    def projector_overlap(self, other_right, other_left) -> float:
        a = np.vdot(self.left, other_right) * np.vdot(other_left, self.right)
        b = np.vdot(self.left, self.right) * np.vdot(other_left, other_right)
        if b == 0:  # defective pairing: certainly not the tracked branch
            return 0.0
        return abs(a / b)


def _eig_pairs(matrix):
    ev, vl, vr = scipy.linalg.eig(matrix, left=True, right=True)
    return ev, vl, vr


def track_branch(matrix_fn, start: Branch, max_steps: int = 16, max_halvings: int = 8) -> Branch:
    """Follow the eigenvalue branch of matrix_fn(s), s in [0, 1], from a known
    start at s=0, selecting at each step the eigenpair of maximal spectral-
    projector overlap with the previous one.  Steps halve adaptively; overlap
    below 0.5 after max_halvings raises BranchCollisionError.
    """
    cur = start
    s = 0.0
    step = 1.0 / max_steps
    halvings = 0
    while s < 1.0 - 1e-12:
        target = min(1.0, s + step)
        ev, vl, vr = _eig_pairs(matrix_fn(target))
        overlaps = [cur.projector_overlap(vr[:, i], vl[:, i]) for i in range(len(ev))]
        best = int(np.argmax(overlaps))
        if overlaps[best] < 0.5:
            if halvings >= max_halvings:
                raise BranchCollisionError(target, overlaps[best])
            step /= 2
            halvings += 1
            continue
        cur = Branch(ev[best], vr[:, best], vl[:, best])
        s = target
    return cur


def _start_branch(model: WalkModel) -> Branch:
    v = transfer.delta_identity(model)
    w = transfer.fiber_weights(model) * v
    return Branch(1.0 + 0j, v, w)


def lambda1(model: WalkModel, k, p, max_steps: int = 16) -> complex:
    """The eigenvalue branch of M(., p) connected to 1 at k=0, at quasi-momentum k
    (complex k allowed; used with k = -i y for the tilted generating function)."""
    return lambda1_branch(model, k, p, max_steps).value


def branch_health(model: WalkModel, k, p, min_overlap: float = 0.75) -> bool:
    """Whether the branch from 1 is still cleanly identifiable at (k, p).

    The eigenprojector must keep overlap >= min_overlap with the k=0 projector;
    past a branch collision the colliding pair mixes 50/50 and the overlap
    drops to ~1/2, which is exactly the failure this guards against.
    """
    try:
        br = lambda1_branch(model, k, p)
    except (BranchCollisionError, SpectralError):
        return False
    start = _start_branch(model)
    return start.projector_overlap(br.right, br.left) >= min_overlap


def continuation_radius(model: WalkModel, k_max: float = 0.6, p_samples: int = 12,
                        levels: int = 7, imaginary: bool = False, seed: int = 0,
                        min_overlap: float = 0.75) -> float:
    """Largest sampled quasi-momentum radius with a healthy tracked branch.

    Geometric scan from k_max downward over axis and random directions and a
    dual-torus grid; the value is a working radius for this instance,
    discovered adaptively rather than derived from bounds.  With imaginary=True
    the scan runs along k = -i y, the direction used by the tilted generating
    function.
    """
    rng = derive_rng(seed, 0xC0)
    dirs = []
    for j in range(model.d):
        e = np.zeros(model.d)
        e[j] = 1.0
        dirs.extend([e, -e])
    for _ in range(2):
        v = rng.normal(size=model.d)
        dirs.append(v / np.linalg.norm(v))
    ps = transfer.torus_grid(model, p_samples)
    radius = k_max
    for _ in range(levels):
        ok = all(
            branch_health(model, (-1j if imaginary else 1.0) * radius * u, p, min_overlap)
            for u in dirs for p in ps
        )
        if ok:
            return radius
        radius /= 2
    return radius


def lambda1_branch(model: WalkModel, k, p, max_steps: int = 16) -> Branch:
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.allclose(k, 0):
        return _start_branch(model)

    def mat(s):
        return transfer.build_fiber_operator(model, s * k, p).matrix

    return track_branch(mat, _start_branch(model), max_steps=max_steps)


# ---------------------------------------------------------------------------
# reduced resolvent and diffusion


def spectral_projector(model: WalkModel, p, tol: float = 1e-9):
    """Rank-one projector onto the eigenvalue-1 eigenspace of M(0, p).

    Both the fixed vector and its dual are known in closed form; residuals
    confirm the gap hypothesis before the projector is trusted.
    """
    op = transfer.build_fiber_operator(model, np.zeros(model.d), p)
    v = transfer.delta_identity(model)
    w = transfer.fiber_weights(model) * v
    Pi = np.outer(v, w.conj()) / (2 * model.d)
    res_r = np.linalg.norm(op.matrix @ Pi - Pi)
    res_l = np.linalg.norm(Pi @ op.matrix - Pi)
    if max(res_r, res_l) > tol:
        raise SpectralError(
            f"eigenvalue-1 eigenprojector residual {max(res_r, res_l):.2e} at p={p}; "
            "gap hypothesis appears to fail"
        )
    return op, Pi


def reduced_resolvent(model: WalkModel, p):
    """S_p(1): inverse of (M(0,p) - 1) on the spectral complement of eigenvalue 1.

    Computed from the bordered system (M - 1 + Pi) X = (I - Pi), which is the
    stable route while the eigenvalue stays simple; residuals are verified.
    """
    op, Pi = spectral_projector(model, p)
    D = op.matrix.shape[0]
    eye = np.eye(D)
    try:
        S = np.linalg.solve(op.matrix - eye + Pi, eye - Pi)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"singular bordered solve at p={p}: gap hypothesis fails") from exc
    if np.linalg.norm((op.matrix - eye) @ S - (eye - Pi)) > 1e-9:
        raise SpectralError(f"reduced resolvent residual too large at p={p}")
    if max(np.linalg.norm(S @ Pi), np.linalg.norm(Pi @ S)) > 1e-10:
        raise SpectralError(f"reduced resolvent does not annihilate the projector at p={p}")
    return S


def drift(model: WalkModel) -> np.ndarray:
    """rbar = (1/2d) sum_tau r(tau); purely combinatorial first-order coefficient."""
    return model.jump.mean()


def diffusion_matrix_analytic(model: WalkModel, p) -> np.ndarray:
    """D(p) from the reduced-resolvent quadratic form (second-order coefficient).

    D_ij = -(1/d) sym_ij [ (1/2) sum_t r_i(t) r_j(t)
           + sum_{t,t'} r_i(t) r_j(t') ( <d0 P_t' , S_p(1) d0 P_t> - 1/(2d) ) ].
    """
    S = reduced_resolvent(model, p)
    m = 2 * model.d
    R = model.jump.r.astype(float)
    w = transfer.fiber_weights(model)
    basis = [transfer.basis_projector_vector(model, t) for t in range(m)]
    mm = np.empty((m, m), dtype=complex)
    for tp in range(m):
        for t in range(m):
            mm[tp, t] = np.vdot(w * basis[tp], S @ basis[t])
    B = 0.5 * (R.T @ R).astype(complex)
    B += R.T @ (mm.T - 1.0 / (2 * model.d)) @ R
    Dmat = -(B + B.T) / (2 * model.d)  # -(1/d) * sym(B)
    im = float(np.max(np.abs(Dmat.imag)))
    if im > 1e-9:
        raise SpectralError(f"diffusion matrix has imaginary residue {im:.2e} at p={p}")
    return Dmat.real


def diffusion_matrix_fd(model: WalkModel, p, h: float = 1e-4, warn_tol: float = 1e-4):
    """D(p) by centered second differences of the tracked branch, Richardson once.

    Returns (D, stencil_disagreement); disagreement above warn_tol means the
    stencil is noise-limited and the caller should adjust h.
    """
    d = model.d
    rbar = drift(model)
    point = _point_report(model, p, delta_floor=1e-9, restricted=False)
    if not point.ok:
        raise SpectralError(
            f"gap hypothesis fails at p={p} (simple={point.simple}, gap={point.gap:.2e}); "
            "refusing the finite-difference branch derivative"
        )

    def f(k):
        return lambda1(model, k, p, max_steps=1) - 1j * np.dot(k, rbar)

    def hess(hh):
        H = np.empty((d, d), dtype=complex)
        f0 = f(np.zeros(d))
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = hh
            H[i, i] = (f(ei) - 2 * f0 + f(-ei)) / hh**2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = hh
                H[i, j] = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4 * hh**2)
                H[j, i] = H[i, j]
        return H

    H1 = hess(h)
    H2 = hess(h / 2)
    richardson = (4 * H2 - H1) / 3
    scale = max(1.0, float(np.max(np.abs(richardson))))
    disagreement = float(np.max(np.abs(H1 - H2))) / scale
    Dmat = -richardson.real
    return Dmat, disagreement


def averaged_diffusion(model: WalkModel, grid_size: int = 8, threads: int = 1) -> np.ndarray:
    """Quadrature average of D(p) over the dual torus."""
    ps = transfer.torus_grid(model, grid_size)
    mats = parallel_map(lambda p: diffusion_matrix_analytic(model, p), ps, threads)
    return np.mean(mats, axis=0)


@dataclass
class SpectralData:
    """Spectral summary of M(0, p) at one dual-torus point."""

    p: list
    eigenvalues: np.ndarray
    gap: float
    lambda1: complex = 1.0 + 0j
    diffusion: np.ndarray | None = None


def spectral_scan(model: WalkModel, grid_size: int = 8, with_diffusion: bool = False,
                  threads: int = 1):
    """Per-grid-point spectra (and optionally D(p)) for reporting."""
    ps = transfer.torus_grid(model, grid_size)

    def one(p):
        op = transfer.build_fiber_operator(model, np.zeros(model.d), p)
        ev = full_spectrum(op.matrix)
        near_one = np.abs(ev - 1) < 1e-10
        rest = ev[~near_one]
        gap = float(1 - np.max(np.abs(rest))) if rest.size else 1.0
        dm = diffusion_matrix_analytic(model, p) if with_diffusion else None
        return SpectralData(list(np.atleast_1d(p)), ev, gap, 1.0 + 0j, dm)

    return parallel_map(one, ps, threads)


# ---------------------------------------------------------------------------
# scaling-limit checks


@dataclass
class ScalingCheck:
    n_values: list
    residuals: list
    monotone: bool
    final: float
    target: complex


def scaled_charfn_limit_check(model: WalkModel, y, t: float, n_list,
                              diffusion_grid: int = 8) -> ScalingCheck:
    """Residuals of the diffusive-scaling limit of the characteristic function.

    Compares e^{-i [tn] rbar.y/sqrt(n)} Phi_[tn](y/sqrt(n)) against the
    quadrature average of e^{-(t/2) <y, D(p) y>} for each n.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rbar = drift(model)
    ps = transfer.torus_grid(model, diffusion_grid)
    target = np.mean([
        np.exp(-0.5 * t * float(y @ diffusion_matrix_analytic(model, p) @ y)) for p in ps
    ])
    residuals = []
    for n in n_list:
        steps = int(t * n)
        ys = y / np.sqrt(n)
        grid = transfer.minimal_grid(model, steps)
        phi = transfer.averaged_characteristic_fk(model, steps, ys, grid)
        lhs = np.exp(-1j * steps * float(rbar @ ys)) * phi
        residuals.append(abs(lhs - target))
    monotone = all(b < a for a, b in zip(residuals[:-1], residuals[1:]))
    return ScalingCheck(list(n_list), residuals, monotone, residuals[-1], complex(target))


def ballistic_charfn_limit_check(model: WalkModel, y, t: float, n_list) -> ScalingCheck:
    """Residuals of the ballistic scaling Phi_[tn](y/n) -> e^{i t y . rbar}."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    rbar = drift(model)
    target = np.exp(1j * t * float(np.dot(y, rbar)))
    residuals = []
    for n in n_list:
        steps = int(t * n)
        ys = y / n
        grid = transfer.minimal_grid(model, steps)
        phi = transfer.averaged_characteristic_fk(model, steps, ys, grid)
        residuals.append(abs(phi - target))
    monotone = all(b < a for a, b in zip(residuals[:-1], residuals[1:]))
    return ScalingCheck(list(n_list), residuals, monotone, residuals[-1], complex(target))
