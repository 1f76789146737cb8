"""Permutation-coin walks: classical reduction, the coupled transfer matrix on
direction (x) coin-set space, and the limiting covariance by several routes.

With permutation coins the quantum distribution for a fixed disorder is the
pushforward of the internal-direction process tau_j, so everything reduces to
a (non-Markovian, non-stationary) classical increment process whose
characteristic function is driven by the nonnegative matrix N below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from .errors import BudgetExceededError, ConfigError, HypothesisUnmetError
from .model import CoinEnsemble, JumpFunction, SiteRepresentation, WalkModel
from . import spectral
from .util import derive_rng


def permutation_coin(perm) -> np.ndarray:
    """0/1 unitary with C[s, t] = 1 iff s = perm[t]."""
    perm = np.asarray(perm, dtype=int)
    m = len(perm)
    if sorted(perm.tolist()) != list(range(m)):
        raise ConfigError("permutations", f"{perm.tolist()} is not a bijection of 0..{m - 1}")
    C = np.zeros((m, m), dtype=complex)
    C[perm, np.arange(m)] = 1.0
    return C


@dataclass
class PermutationModel:
    """Walk whose coins are permutation matrices, stored as index maps."""

    jump: JumpFunction
    perms: np.ndarray  # (F, 2d) int: perms[i] is the i-th coin as an index map
    coins: CoinEnsemble = None
    site: SiteRepresentation = None
    phi0: np.ndarray = None
    expect: dict = field(default_factory=dict)

    def __post_init__(self):
        self.perms = np.asarray(self.perms, dtype=int)
        matrices = [permutation_coin(g) for g in self.perms]
        if self.coins is None:
            raise ConfigError("permutations", "need the Markov data (p, P) via CoinEnsemble")
        if not np.allclose(self.coins.coins, np.stack(matrices)):
            self.coins = CoinEnsemble(np.stack(matrices), self.coins.p, self.coins.P)
        if self.phi0 is None:
            phi0 = np.zeros(2 * self.jump.d, dtype=complex)
            phi0[0] = 1.0
            self.phi0 = phi0
        self.phi0 = np.asarray(self.phi0, dtype=complex).reshape(2 * self.jump.d)

    @property
    def d(self) -> int:
        return self.jump.d

    @property
    def F(self) -> int:
        return self.coins.F

    @property
    def weights(self) -> np.ndarray:
        """Initial direction law |a_tau|^2."""
        return np.abs(self.phi0) ** 2

    def walk_model(self) -> WalkModel:
        """The same instance as a generic walk, for the quantum pipeline."""
        return WalkModel(self.jump, self.coins, self.site, phi0=self.phi0,
                         expect=self.expect)


def make_permutation_model(d, jumps, perms, p, P, gens=None, phi0=None, expect=None):
    perms = np.asarray(perms, dtype=int)
    matrices = np.stack([permutation_coin(g) for g in perms])
    coins = CoinEnsemble(matrices, p, P)
    if gens is None:
        gens = [np.arange(coins.F) for _ in range(d)]
    site = SiteRepresentation(d, gens, coins.F)
    return PermutationModel(JumpFunction(d, np.asarray(jumps, dtype=int)), perms,
                            coins, site, phi0, expect or {})


# ---------------------------------------------------------------------------
# the internal-direction process


@dataclass
class TauPath:
    """One realization of the direction process with its partial sums."""

    tau0: int
    taus: np.ndarray        # tau_1 .. tau_n
    partial_sums: np.ndarray  # S_1 .. S_n, shape (n, d)
    omega: np.ndarray       # the driving disorder path
    seed: int | None = None


def _coset_tables(pm: PermutationModel):
    site = pm.site
    nB = site.n_cosets
    sig_of_coset = np.stack([site.sigma_at(x) for x in site.base_cell])  # (nB, F)
    cstep = np.empty((nB, 2 * pm.d), dtype=int)
    for b in range(nB):
        for t in range(2 * pm.d):
            cstep[b, t] = site.coset_index(site.base_cell[b] + pm.jump.r[t])
    return sig_of_coset, cstep


def sample_tau_process(pm: PermutationModel, n: int, seed: int) -> TauPath:
    """Sample the direction process: tau_j = sigma_{S_{j-1}}(omega_j)(tau_{j-1})."""
    rng = derive_rng(seed)
    tau0 = int(rng.choice(2 * pm.d, p=pm.weights))
    omega = np.empty(n, dtype=int)
    omega[0] = rng.choice(pm.F, p=pm.coins.p)
    for j in range(1, n):
        omega[j] = rng.choice(pm.F, p=pm.coins.P[omega[j - 1]])
    taus, sums = _push_tau(pm, tau0, omega)
    return TauPath(tau0, taus, sums, omega, seed)


def _push_tau(pm: PermutationModel, tau0: int, omega):
    site = pm.site
    S = np.zeros(pm.d, dtype=int)
    tau = tau0
    taus = np.empty(len(omega), dtype=int)
    sums = np.empty((len(omega), pm.d), dtype=int)
    for j, w in enumerate(omega):
        eff = site.sigma_at(S)[w]
        tau = int(pm.perms[eff][tau])
        S = S + pm.jump.r[tau]
        taus[j] = tau
        sums[j] = S
    return taus, sums


def pushforward_distribution(pm: PermutationModel, omega) -> dict:
    """Classical law of the endpoint for a fixed disorder: mixture over tau0."""
    out: dict = {}
    for tau0, w in enumerate(pm.weights):
        if w == 0:
            continue
        _, sums = _push_tau(pm, tau0, omega)
        k = tuple(int(v) for v in sums[-1])
        out[k] = out.get(k, 0.0) + float(w)
    return out


def path_law_bruteforce(pm: PermutationModel, n: int, budget: int = 10**6) -> dict:
    """Exact law of (tau_0 .. tau_n) by summing the disorder-kernel product.

    Evaluates, for every reachable direction path, the sum over coin paths of
    p(pi_1) P(sigma_{r(tau_1)} pi_1, pi_2) ... <tau_j | C(pi_j) tau_{j-1}>
    as a running vector over the coin set.
    """
    if pm.F**n > budget:
        raise BudgetExceededError(f"|Omega|^n = {pm.F**n} exceeds budget {budget}")
    site, P, p = pm.site, pm.coins.P, pm.coins.p
    out: dict = {}

    def descend(prefix, tau, u, depth):
        if depth == n:
            out[prefix] = out.get(prefix, 0.0) + pm.weights[prefix[0]] * float(u.sum())
            return
        for tau_next in np.unique(pm.perms[:, tau]):
            hits = pm.perms[:, tau] == tau_next
            if depth == 0:
                u_next = np.where(hits, p, 0.0)
            else:
                # sum_pi u(pi) P(sigma_{r(tau)} pi, pi'), with tau the current state
                shift = site.sigma_at(pm.jump.r[tau])
                u_shifted = np.empty(pm.F)
                u_shifted[shift] = u
                u_next = np.where(hits, u_shifted @ P, 0.0)
            descend(prefix + (int(tau_next),), int(tau_next), u_next, depth + 1)

    for tau0, w in enumerate(pm.weights):
        if w == 0:
            continue
        descend((tau0,), tau0, np.zeros(pm.F), 0)
    return out
