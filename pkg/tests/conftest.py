"""Shared model corpus.

The flip model (d=1, identity/swap permutation coins, i.i.d. staying
probability q, trivial site action) is the canonical analytically solvable
fixture: its increment process is a persistent random walk with limiting
variance q/(1-q).
"""

import numpy as np
import pytest

from mqwalk.model import CoinEnsemble, JumpFunction, SiteRepresentation, WalkModel

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def make_model(d, jumps, coins, p, P, gens=None, phi0=None, kernel=None, expect=None):
    coins = CoinEnsemble(coins, p, P)
    if gens is None:
        gens = [np.arange(coins.F) for _ in range(d)]
    site = SiteRepresentation(d, gens, coins.F)
    if phi0 is None and kernel is None:
        phi0 = np.zeros(2 * d, dtype=complex)
        phi0[0] = 1.0
    return WalkModel(JumpFunction(d, np.asarray(jumps, dtype=int)), coins, site,
                     phi0=phi0, kernel=kernel, expect=expect or {})


def flip_model(q, phi0=None):
    """Identity/swap coins, i.i.d.(q), trivial sigma; closed-form variance q/(1-q)."""
    return make_model(1, [[1], [-1]], [I2, X], [q, 1 - q],
                      [[q, 1 - q], [q, 1 - q]], phi0=phi0)


def xz_model():
    """{X, Z} with rank-one kernel: certified by the sufficient-condition checker."""
    return make_model(1, [[1], [-1]], [X, Z], [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]],
                      phi0=np.array([1, 1j]) / np.sqrt(2))


def markov2_model():
    """Genuinely Markovian two-coin chain with a Hadamard coin in the mix."""
    P = np.array([[0.7, 0.3], [0.4, 0.6]])
    p = np.array([4 / 7, 3 / 7])
    return make_model(1, [[1], [-1]], [HAD, X], p, P,
                      phi0=np.array([1, 1j]) / np.sqrt(2))


def sigma2_model():
    """Nontrivial site action: the swap generator gives a two-point base cell."""
    return make_model(1, [[1], [-1]], [X, Z], [0.5, 0.5], [[0.6, 0.4], [0.4, 0.6]],
                      gens=[np.array([1, 0])], phi0=np.array([1, 1j]) / np.sqrt(2))


def skew_model():
    """Asymmetric jumps r = (2, -1), drift 1/2; still certified by the checker."""
    return make_model(1, [[2], [-1]], [X, Z], [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]],
                      phi0=np.array([1, 1]) / np.sqrt(2))


def coin3_model():
    """Three-coin i.i.d. ensemble including a Hadamard coin."""
    return make_model(1, [[1], [-1]], [I2, X, HAD], [0.4, 0.3, 0.3],
                      [[0.4, 0.3, 0.3]] * 3, phi0=np.array([1, 1j]) / np.sqrt(2))


def hadamard_det_model():
    """Deterministic Hadamard walk: ballistic, the gap hypothesis must fail."""
    return make_model(1, [[1], [-1]], [HAD], [1.0], [[1.0]],
                      expect={"assumption_S": False})


def identity_det_model():
    """Deterministic identity walk: eigenvalue 1 degenerate, hypothesis fails."""
    return make_model(1, [[1], [-1]], [I2], [1.0], [[1.0]],
                      expect={"assumption_S": False})


def d2_model():
    """d=2 with a swap generator along the first axis: base cell of size two."""
    c = np.kron(HAD, HAD)
    c2 = np.kron(X, I2) @ c
    return make_model(2, [[1, 0], [-1, 0], [0, 1], [0, -1]], [c, c2], [0.5, 0.5],
                      [[0.5, 0.5], [0.5, 0.5]],
                      gens=[np.array([1, 0]), np.array([0, 1])],
                      phi0=np.array([1, 0, 0, 0], dtype=complex))


CORPUS_D1 = {
    "flip(0.3)": flip_model(0.3),
    "xz": xz_model(),
    "markov2": markov2_model(),
    "sigma2": sigma2_model(),
    "skew": skew_model(),
    "coin3": coin3_model(),
}

NEGATIVE_CONTROLS = {
    "hadamard_det": hadamard_det_model(),
    "identity_det": identity_det_model(),
}

GAPPED = ["flip(0.3)", "xz", "markov2", "sigma2", "skew", "coin3"]


@pytest.fixture(params=list(CORPUS_D1), ids=list(CORPUS_D1))
def d1_model(request):
    return CORPUS_D1[request.param]


@pytest.fixture
def flip03():
    return flip_model(0.3)
