"""Ground-truth engine: exact evolution under a fixed disorder realization.

The window [-rho*n, rho*n]^d is sized from the jump range so the evolution is
exact (the support can never touch the boundary before step n), and amplitudes
are stored densely over the window.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError
from .model import WalkModel
from .util import derive_rng


@dataclass
class PathSample:
    """A disorder realization with its Markov weight and the seed used."""

    steps: np.ndarray  # coin indices, length n
    weight: float
    seed: int | None = None


@dataclass
class LatticeState:
    """Dense amplitudes over the exact window; origin sits at index `radius` per axis."""

    psi: np.ndarray  # shape (L,)*d + (2d,)
    radius: int
    d: int

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.psi) ** 2)))

    def distribution(self, tol: float = 0.0) -> dict:
        """Map lattice point -> probability, dropping exact zeros."""
        probs = np.sum(np.abs(self.psi) ** 2, axis=-1)
        out = {}
        for idx in np.argwhere(probs > tol):
            out[tuple(int(i) - self.radius for i in idx)] = float(probs[tuple(idx)])
        return out


class _WindowTables:
    """Per-window cache: coset-group element index of every site."""

    def __init__(self, model: WalkModel, radius: int):
        site = model.site
        d, L = model.d, 2 * radius + 1
        coords = np.arange(L) - radius
        self.group_index = np.zeros((L,) * d, dtype=int)
        perms = {}
        for flat in np.ndindex(*([L] * d)):
            x = np.array([coords[i] for i in flat])
            b = site.coset_index(x)
            self.group_index[flat] = b
            if b not in perms:
                perms[b] = site.sigma_at(x)
        self.perm_of_group = np.stack([perms[b] for b in range(len(perms))])


def initial_state(model: WalkModel, n: int) -> LatticeState:
    if model.phi0 is None:
        raise ValueError("exact evolution needs a coin-vector initial condition; "
                         "density kernels go through the transfer module")
    radius = max(model.jump.rho * n, 1)
    L = 2 * radius + 1
    psi = np.zeros((L,) * model.d + (2 * model.d,), dtype=complex)
    psi[(radius,) * model.d] = model.phi0
    return LatticeState(psi, radius, model.d)


def step_unitary(state: LatticeState, coin_index_per_site: np.ndarray, model: WalkModel) -> LatticeState:
    """One step: per-site coin update, then coin-conditioned shift.

    coin_index_per_site has the window shape and holds indices into the coin set.
    """
    psi = state.psi
    upd = np.empty_like(psi)
    for eta in range(model.F):
        mask = coin_index_per_site == eta
        if not mask.any():
            continue
        upd[mask] = psi[mask] @ model.coins.coins[eta].T
    new = np.zeros_like(psi)
    for t in range(2 * model.d):
        comp = upd[..., t]
        for axis in range(model.d):
            shift = int(model.jump.r[t, axis])
            if shift:
                comp = np.roll(comp, shift, axis=axis)
        new[..., t] = comp
    return LatticeState(new, state.radius, state.d)


def sample_markov_path(coins, n: int, seed: int | None = None, rng=None) -> PathSample:
    """Stationary-start Markov path of coin indices; deterministic given seed."""
    if rng is None:
        rng = derive_rng(seed)
    steps = np.empty(n, dtype=int)
    steps[0] = rng.choice(coins.F, p=coins.p)
    for j in range(1, n):
        steps[j] = rng.choice(coins.F, p=coins.P[steps[j - 1]])
    return PathSample(steps, path_weight(coins, steps), seed)


def path_weight(coins, steps) -> float:
    w = float(coins.p[steps[0]])
    for a, b in zip(steps[:-1], steps[1:]):
        w *= float(coins.P[a, b])
    return w


def distribution_for_path(model: WalkModel, path: PathSample, n: int | None = None) -> dict:
    """W_k(n) for one disorder realization, as a map lattice point -> probability."""
    steps = path.steps if n is None else path.steps[:n]
    n = len(steps)
    state = initial_state(model, n)
    tables = _WindowTables(model, state.radius)
    for w in steps:
        coin_idx = tables.perm_of_group[tables.group_index, w]
        state = step_unitary(state, coin_idx, model)
    return state.distribution()


def averaged_distribution_bruteforce(model: WalkModel, n: int, budget: int = 10**6) -> dict:
    """Exact Markov-weighted average over all |Omega|^n disorder paths.

    Shares evolution prefixes across paths (depth-first over the path tree);
    the result is identical to summing distribution_for_path over all paths.
    """
    F = model.F
    if F**n > budget:
        raise BudgetExceededError(
            f"|Omega|^n = {F**n} exceeds budget {budget}; use Monte Carlo or the transfer module"
        )
    state0 = initial_state(model, n)
    tables = _WindowTables(model, state0.radius)
    coin_fields = [tables.perm_of_group[tables.group_index, w] for w in range(F)]
    acc: dict = {}

    def descend(state, depth, prev, weight):
        if depth == n:
            for k, pr in state.distribution().items():
                acc[k] = acc.get(k, 0.0) + weight * pr
            return
        for w in range(F):
            wgt = weight * (model.coins.p[w] if depth == 0 else model.coins.P[prev, w])
            if wgt == 0.0:
                continue
            descend(step_unitary(state, coin_fields[w], model), depth + 1, w, wgt)

    descend(state0, 0, -1, 1.0)
    return acc


def monte_carlo_distribution(model: WalkModel, n: int, trials: int, seed: int) -> dict:
    """Empirical average of W over sampled disorder paths (trial t uses seed (seed, t))."""
    acc: dict = {}
    for t in range(trials):
        path = sample_markov_path(model.coins, n, rng=derive_rng(seed, t))
        dist = distribution_for_path(model, path)
        for k, pr in dist.items():
            acc[k] = acc.get(k, 0.0) + pr / trials
    return acc


def characteristic_function_empirical(dist: dict, y) -> complex:
    """sum_k dist[k] e^{i y.k} for a distribution on Z^d."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return complex(sum(pr * np.exp(1j * float(np.dot(y, np.array(k)))) for k, pr in dist.items()))


def distribution_moments(dist: dict, d: int):
    """(mean vector, second-moment matrix about the mean) of a lattice distribution."""
    mean = np.zeros(d)
    for k, pr in dist.items():
        mean += pr * np.array(k, dtype=float)
    cov = np.zeros((d, d))
    for k, pr in dist.items():
        v = np.array(k, dtype=float) - mean
        cov += pr * np.outer(v, v)
    return mean, cov
