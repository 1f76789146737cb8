"""Fibered one-step transfer operator of the disorder-averaged dynamics.

A fiber vector lives on base_cell x coin-set with 2d x 2d matrix values and is
stored as an ndarray of shape (nB, F, 2d, 2d); flattening in C order gives the
coordinates in which the dense operator matrix acts.  The inner product is
weighted by the stationary distribution:

    <u, v> = sum_{x, eta} p(eta) tr(u(x,eta)^* v(x,eta)),

and every operator-norm statement below refers to that metric.

For fixed quasi-momentum k the operator depends on the dual variable p only
through finitely many phases e^{i p.(r(t)-r(t'))}, so it is assembled once as
a small set of constant blocks and re-phased per quadrature node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooSmallError
from .model import WalkModel
from .util import derive_rng


# ---------------------------------------------------------------------------
# fiber vectors


def fiber_shape(model: WalkModel):
    m = 2 * model.d
    return (model.site.n_cosets, model.F, m, m)


def fiber_dim(model: WalkModel) -> int:
    nB, F, m, _ = fiber_shape(model)
    return nB * F * m * m


def fiber_weights(model: WalkModel) -> np.ndarray:
    """Diagonal of the weighted metric, flattened like a fiber vector."""
    nB, F, m, _ = fiber_shape(model)
    w = np.empty((nB, F, m, m))
    w[:] = model.coins.p[None, :, None, None]
    return w.reshape(-1)


def fiber_inner(model: WalkModel, u: np.ndarray, v: np.ndarray) -> complex:
    w = fiber_weights(model)
    return complex(np.vdot(u.reshape(-1) * w, v.reshape(-1)))


def delta_identity(model: WalkModel) -> np.ndarray:
    """delta_0 (x) Id: the distinguished fixed vector of the fiber operator at k=0."""
    v = np.zeros(fiber_shape(model), dtype=complex)
    v[0] = np.eye(2 * model.d)
    return v.reshape(-1)


def basis_projector_vector(model: WalkModel, t: int) -> np.ndarray:
    """delta_0 (x) P_t, constant in the coin-set argument."""
    v = np.zeros(fiber_shape(model), dtype=complex)
    v[0, :, t, t] = 1.0
    return v.reshape(-1)


def fourier_initial(model: WalkModel, k=None, p=None) -> np.ndarray:
    """Fiber-space image of the initial condition.

    For a walker localized at the origin this is delta_0 (x) |phi0><phi0|,
    independent of (k, p, eta).  For a finitely supported density kernel the
    finite transform sum is evaluated at the given (k, p).
    """
    nB, F, m, _ = fiber_shape(model)
    v = np.zeros(fiber_shape(model), dtype=complex)
    if model.phi0 is not None:
        v[0] = np.outer(model.phi0, model.phi0.conj())
        return v.reshape(-1)
    k = np.zeros(model.d) if k is None else np.atleast_1d(np.asarray(k, dtype=complex))
    p = np.zeros(model.d) if p is None else np.atleast_1d(np.asarray(p, dtype=float))
    for (x, y), mat in model.kernel.items():
        diff = np.array(x, dtype=int) - np.array(y, dtype=int)
        b = model.site.coset_index(diff)
        phase = np.exp(1j * np.dot(p, diff)) * np.exp(1j * np.dot(k, np.array(y, dtype=float)))
        for eta in range(F):
            v[b, eta] += phase * np.asarray(mat, dtype=complex)
    return v.reshape(-1)


# ---------------------------------------------------------------------------
# operator assembly


@dataclass
class FiberBlocks:
    """p-independent factorization: M(k, p) = sum_f e^{i p . f} * block[f]."""

    k: np.ndarray
    freqs: list  # list of integer d-vectors (tuples)
    blocks: np.ndarray  # (nfreq, D, D)

    def at(self, p) -> np.ndarray:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        phases = np.array([np.exp(1j * np.dot(p, np.array(f))) for f in self.freqs])
        return np.tensordot(phases, self.blocks, axes=1)

    def at_many(self, ps) -> np.ndarray:
        """Stacked operators for a batch of p points, shape (npts, D, D)."""
        ps = np.asarray(ps, dtype=float)
        fr = np.array(self.freqs, dtype=float)  # (nfreq, d)
        phases = np.exp(1j * ps @ fr.T)  # (npts, nfreq)
        return np.einsum("nf,fij->nij", phases, self.blocks)


@dataclass
class FiberOperator:
    """Dense fiber operator at one (k, p), together with its metric weights."""

    k: np.ndarray
    p: np.ndarray
    matrix: np.ndarray
    weights: np.ndarray

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def apply_power(self, vec: np.ndarray, n: int) -> np.ndarray:
        out = vec
        for _ in range(n):
            out = self.matrix @ out
        return out

    def weighted_norm(self) -> float:
        """Operator norm in the p-weighted metric (<=1 for real (k,p))."""
        sw = np.sqrt(self.weights)
        return float(np.linalg.norm((sw[:, None] * self.matrix) / sw[None, :], 2))

    def weighted_adjoint_matrix(self) -> np.ndarray:
        """W^{-1} M^H W: the adjoint in the weighted metric, from the matrix itself."""
        w = self.weights
        return (self.matrix.conj().T * w[None, :]) / w[:, None]


def fiber_blocks(model: WalkModel, k) -> FiberBlocks:
    """Assemble the p-independent blocks of M(k, .) for complex quasi-momentum k."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    site, coins, R = model.site, model.coins, model.jump.r
    nB, F, m, _ = fiber_shape(model)
    D = nB * F * m * m
    by_freq: dict = {}
    for b in range(nB):
        x = site.base_cell[b]
        for t in range(m):
            sigL = site.sigma_at(x - R[t])
            for tp in range(m):
                bsrc = site.coset_index(x - R[t] + R[tp])
                freq = tuple(int(v) for v in (R[t] - R[tp]))
                kphase = np.exp(1j * np.dot(k, R[tp]))
                sigR = site.sigma_at(-R[tp])
                blk = by_freq.setdefault(freq, np.zeros((nB, F, m, m, nB, F, m, m), dtype=complex))
                for eta in range(F):
                    CL = coins.coins[sigL[eta]]
                    CR = coins.coins[sigR[eta]]
                    outer = kphase * np.outer(CL[t, :], CR[tp, :].conj())
                    for z in range(F):
                        zp = sigR[z]
                        blk[b, eta, t, tp, bsrc, zp, :, :] += coins.Q[eta, z] * outer
    freqs = sorted(by_freq)
    blocks = np.stack([by_freq[f].reshape(D, D) for f in freqs])
    return FiberBlocks(k, [np.array(f) for f in freqs], blocks)


def build_fiber_operator(model: WalkModel, k, p) -> FiberOperator:
    """Materialize M(k, p) as a dense matrix."""
    blocks = fiber_blocks(model, k)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return FiberOperator(blocks.k, p, blocks.at(p), fiber_weights(model))


def build_fiber_adjoint(model: WalkModel, k, p) -> FiberOperator:
    """The adjoint fiber operator, from its own displayed sum (not by transposing)."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    site, coins, R = model.site, model.coins, model.jump.r
    nB, F, m, _ = fiber_shape(model)
    D = nB * F * m * m
    M = np.zeros((nB, F, m, m, nB, F, m, m), dtype=complex)
    for b in range(nB):
        x = site.base_cell[b]
        sigx = site.sigma_at(x)
        for t in range(m):
            for tp in range(m):
                bsrc = site.coset_index(x + R[t] - R[tp])
                phase = np.exp(-1j * np.dot(k, R[tp])) * np.exp(-1j * np.dot(p, R[t] - R[tp]))
                sigRp = site.sigma_at(R[tp])
                for eta in range(F):
                    for z in range(F):
                        CA = coins.coins[sigx[z]]
                        CB = coins.coins[z]
                        zpp = sigRp[z]
                        blk = np.outer(CA[t, :].conj(), CB[tp, :])
                        M[b, eta, :, :, bsrc, zpp, t, tp] += coins.P[eta, z] * phase * blk
    return FiberOperator(k, p, M.reshape(D, D), fiber_weights(model))


def build_fiber_factors(model: WalkModel, k, p):
    """The three-factor decomposition (shift-phase) (site-conjugation) (back-kernel).

    Returns dense matrices (Sig, S, Qt) whose product equals the direct build.
    """
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    site, coins, R = model.site, model.coins, model.jump.r
    nB, F, m, _ = fiber_shape(model)
    D = nB * F * m * m

    # (Qt v)(b, eta) = sum_z Q[eta, z] v(b, z), identity on the matrix slot
    Qt = np.zeros((nB, F, m, m, nB, F, m, m), dtype=complex)
    for b in range(nB):
        for eta in range(F):
            for z in range(F):
                for a in range(m):
                    for c in range(m):
                        Qt[b, eta, a, c, b, z, a, c] = coins.Q[eta, z]

    S = np.zeros_like(Qt)
    for b in range(nB):
        x = site.base_cell[b]
        sigx = site.sigma_at(x)
        for eta in range(F):
            CLm = coins.coins[sigx[eta]]
            CRm = coins.coins[eta]  # sigma_0 = identity
            for a in range(m):
                for c in range(m):
                    for ap in range(m):
                        for cp in range(m):
                            S[b, eta, a, c, b, eta, ap, cp] = CLm[a, ap] * np.conj(CRm[c, cp])

    Sig = np.zeros_like(Qt)
    for b in range(nB):
        x = site.base_cell[b]
        for t in range(m):
            for tp in range(m):
                bsrc = site.coset_index(x - R[t] + R[tp])
                phase = np.exp(1j * np.dot(k, R[tp])) * np.exp(1j * np.dot(p, R[t] - R[tp]))
                sigR = site.sigma_at(-R[tp])
                for z in range(F):
                    Sig[b, z, t, tp, bsrc, sigR[z], t, tp] += phase
    return Sig.reshape(D, D), S.reshape(D, D), Qt.reshape(D, D)


# ---------------------------------------------------------------------------
# torus quadrature and the averaged characteristic function


def gamma_star_degree(model: WalkModel) -> int:
    """Per-step bound on |r(t)-r(t')| in dual-lattice coordinates (ceiled)."""
    R = model.jump.r
    Hinv = np.linalg.inv(model.site.gamma_basis.astype(float))
    diffs = (R[:, None, :] - R[None, :, :]).reshape(-1, model.d)
    if not diffs.size:
        return 0
    return int(np.ceil(np.max(np.abs(Hinv @ diffs.T)) - 1e-12))


def kernel_degree(model: WalkModel) -> int:
    """Extra dual-coordinate degree carried by a density-kernel initial condition."""
    if model.kernel is None:
        return 0
    Hinv = np.linalg.inv(model.site.gamma_basis.astype(float))
    deg = 0
    for (x, y), _ in model.kernel.items():
        diff = np.array(x, dtype=float) - np.array(y, dtype=float)
        deg = max(deg, int(np.ceil(np.max(np.abs(Hinv @ diff)) - 1e-12)))
    return deg


def minimal_grid(model: WalkModel, n: int) -> int:
    """Smallest admissible quadrature size: the integrand is a trigonometric
    polynomial of per-axis degree <= n * gamma_star_degree + kernel_degree."""
    return 2 * (n * gamma_star_degree(model) + kernel_degree(model)) + 2


# default grid offset in cells: irrational, so grid points never land on the
# arithmetically nice dual-torus points where isolated spectral degeneracies sit
GOLDEN_OFFSET = 0.6180339887498949


def torus_grid(model: WalkModel, N: int, offset: float = GOLDEN_OFFSET) -> np.ndarray:
    """Uniform N^d grid on the dual torus, mapped through the coordinate map.

    Shifted by `offset` grid cells; exactness for trigonometric polynomials is
    offset-independent.
    """
    ticks = 2 * np.pi * (np.arange(N) + offset) / N
    if model.d == 1:
        ts = ticks[:, None]
    else:
        mesh = np.meshgrid(*([ticks] * model.d), indexing="ij")
        ts = np.stack([g.reshape(-1) for g in mesh], axis=1)
    return ts @ model.site.coordinate_map.T


def averaged_characteristic_fk(model: WalkModel, n: int, y, grid_size: int) -> complex:
    """Averaged characteristic function at time n through the fiber operator.

    Phi_n(y) = sum_eta p(eta) Int tr (M(y,p)^n rho0_hat)(0, eta) dp~, with the
    torus integral replaced by the exact uniform quadrature.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    need = minimal_grid(model, n)
    if grid_size < need:
        raise GridTooSmallError(grid_size, need)
    blocks = fiber_blocks(model, y)
    ps = torus_grid(model, grid_size)
    nB, F, m, _ = fiber_shape(model)
    pvec = model.coins.p
    ops = blocks.at_many(ps)  # (npts, D, D)
    if model.kernel is None:
        v0 = fourier_initial(model)
        vs = np.broadcast_to(v0, (ops.shape[0], v0.size)).copy()
    else:
        vs = np.stack([fourier_initial(model, y, p) for p in ps])
    for _ in range(n):
        vs = np.einsum("nij,nj->ni", ops, vs)
    vs4 = vs.reshape(ops.shape[0], nB, F, m, m)
    traces = np.einsum("nfaa->nf", vs4[:, 0])  # coefficient at the origin coset
    vals = traces @ pvec
    return complex(vals.mean())


def operator_norm_bound_check(model: WalkModel, samples: int, seed: int = 0, tol: float = 1e-10):
    """Max weighted operator norm over random real (k, p); flags any value > 1+tol."""
    rng = derive_rng(seed, 0xB0)
    worst = 0.0
    flagged = []
    for i in range(samples):
        k = rng.uniform(0, 2 * np.pi, model.d)
        t = rng.uniform(0, 2 * np.pi, model.d)
        p = model.site.coordinate_map @ t
        op = build_fiber_operator(model, k, p)
        nm = op.weighted_norm()
        if nm > worst:
            worst = nm
        if nm > 1 + tol:
            flagged.append((k.tolist(), p.tolist(), nm))
    return {"max_norm": worst, "samples": samples, "flagged": flagged}
