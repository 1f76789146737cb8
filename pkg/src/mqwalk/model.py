"""Structural data of a walk instance: jumps, coin ensemble, site representation.

Coin-basis convention used everywhere: the 2d internal directions are ordered
+1, -1, +2, -2, ..., +d, -d, so basis index 2j encodes +(j+1) and 2j+1 encodes
-(j+1).  The jump table is a (2d, d) integer array in this order.

The site representation is given by d commuting permutations g_1..g_d of the
coin-set indices {0..F-1}; sigma_x = prod_j g_j^{x_j}.  Its kernel is the
period lattice Gamma, computed exactly by enumerating generator powers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigError

FLOAT_TOL = 1e-12


def tau_label(index: int) -> int:
    """Signed direction label for a coin-basis index (2j -> +(j+1), 2j+1 -> -(j+1))."""
    return (index // 2 + 1) * (1 if index % 2 == 0 else -1)


@dataclass(frozen=True)
class JumpFunction:
    """Finite-range jump table: one integer displacement per coin direction."""

    d: int
    r: np.ndarray  # (2d, d) int

    def __post_init__(self):
        r = np.asarray(self.r, dtype=int)
        if self.d < 1:
            raise ConfigError("d", "lattice dimension must be a positive integer")
        if r.shape != (2 * self.d, self.d):
            raise ConfigError("jump", f"expected shape {(2 * self.d, self.d)}, got {r.shape}")
        object.__setattr__(self, "r", r)

    @property
    def rho(self) -> int:
        """Max-norm range bound: every jump lies in [-rho, rho]^d."""
        return int(np.max(np.abs(self.r))) if self.r.size else 0

    def mean(self) -> np.ndarray:
        """(1/2d) sum of all jumps; the ballistic drift of the walk."""
        return self.r.mean(axis=0)


class CoinEnsemble:
    """Finite set of unitary coins with a stationary Markov chain driving them.

    P[a, b] = Prob(next=b | current=a).  The back-kernel Q is derived from
    stationarity: Q[z, e] = p[e] P[e, z] / p[z].
    """

    def __init__(self, coins, p, P):
        coins = np.asarray(coins, dtype=complex)
        p = np.asarray(p, dtype=float)
        P = np.asarray(P, dtype=float)
        if coins.ndim != 3 or coins.shape[1] != coins.shape[2]:
            raise ConfigError("coins", f"expected (F, m, m) array, got shape {coins.shape}")
        F = coins.shape[0]
        if F < 1:
            raise ConfigError("coins", "need at least one coin")
        if p.shape != (F,):
            raise ConfigError("p", f"expected length {F}, got shape {p.shape}")
        if P.shape != (F, F):
            raise ConfigError("P", f"expected shape {(F, F)}, got shape {P.shape}")
        self.coins = coins
        self.p = p
        self.P = P
        self.F = F
        with np.errstate(divide="ignore", invalid="ignore"):
            self.Q = (p[None, :] * P.T) / p[:, None]

    def unitarity_residuals(self):
        eye = np.eye(self.coins.shape[1])
        return [float(np.linalg.norm(C.conj().T @ C - eye)) for C in self.coins]

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.P.sum(axis=1) - 1.0)))

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.p @ self.P - self.p)))

    def q_row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.Q.sum(axis=1) - 1.0)))

    def detailed_relation_residual(self) -> float:
        """max |p(z) Q(z,e) - p(e) P(e,z)|; zero by construction up to rounding."""
        lhs = self.p[:, None] * self.Q
        rhs = self.p[None, :] * self.P.T
        return float(np.max(np.abs(lhs - rhs)))


def _perm_order(g: np.ndarray) -> int:
    order, cur = 1, g.copy()
    ident = np.arange(len(g))
    while not np.array_equal(cur, ident):
        cur = g[cur]
        order += 1
    return order


def _hermite_basis(vectors, d):
    """Column-style Hermite normal form of the integer lattice spanned by `vectors`."""
    import sympy
    from sympy.matrices.normalforms import hermite_normal_form

    M = sympy.Matrix(np.array(vectors, dtype=int).T)
    H = hermite_normal_form(M)
    H = np.array(H.tolist(), dtype=int)
    if H.shape != (d, d):
        raise ConfigError("sigma_generators", "period lattice is not full rank")
    return H


class SiteRepresentation:
    """Commuting measure-preserving action of Z^d on the coin set.

    Derives the period lattice Gamma (as a Hermite-form basis), the base cell
    B_Gamma (lexicographically smallest representative per coset, so 0 comes
    first), and the dual basis p*_j with p*_j . gamma_i = delta_ij held exactly
    in rational arithmetic.
    """

    def __init__(self, d, generators, F):
        self.d = d
        self.F = F
        gens = []
        for j, g in enumerate(generators):
            g = np.asarray(g, dtype=int)
            if g.shape != (F,) or sorted(g.tolist()) != list(range(F)):
                raise ConfigError(f"sigma_generators[{j}]", f"not a permutation of 0..{F - 1}")
            gens.append(g)
        if len(gens) != d:
            raise ConfigError("sigma_generators", f"expected {d} generators, got {len(gens)}")
        self.generators = gens
        self.orders = [_perm_order(g) for g in gens]
        # powers of each generator, so sigma_at is table lookup
        self._powers = []
        for g, o in zip(gens, self.orders):
            tab = np.empty((o, F), dtype=int)
            tab[0] = np.arange(F)
            for m in range(1, o):
                tab[m] = g[tab[m - 1]]
            self._powers.append(tab)
        # enumerate the box prod [0, o_j) and group by the permutation realized
        ident = tuple(range(F))
        self._box_sigma = {}
        reps = {}
        kernel_vectors = []
        for x in itertools.product(*[range(o) for o in self.orders]):
            sig = np.arange(F)
            for j in range(d):
                sig = self._powers[j][x[j]][sig]
            key = tuple(int(v) for v in sig)
            self._box_sigma[x] = np.asarray(sig)
            if key not in reps:
                reps[key] = np.array(x, dtype=int)
            if key == ident and any(x):
                kernel_vectors.append(np.array(x, dtype=int))
        self.base_cell = sorted((v for v in reps.values()), key=lambda v: tuple(v))
        self.base_cell = [np.array(v, dtype=int) for v in self.base_cell]
        self.n_cosets = len(self.base_cell)
        self._coset_of_sigma = {
            tuple(int(v) for v in self._box_sigma[tuple(x)]): i
            for i, x in enumerate(self.base_cell)
        }
        basis_candidates = [o * e for o, e in zip(self.orders, np.eye(d, dtype=int))]
        basis_candidates.extend(kernel_vectors)
        self.gamma_basis = _hermite_basis(basis_candidates, d)  # columns are basis vectors
        det = round(abs(float(np.linalg.det(self.gamma_basis))))
        if det != self.n_cosets:
            raise ConfigError(
                "sigma_generators",
                f"inconsistent lattice: |det Gamma-basis| = {det} but {self.n_cosets} cosets",
            )
        # exact dual basis: columns of H^{-T}
        Hfrac = [[Fraction(int(self.gamma_basis[i, j])) for j in range(d)] for i in range(d)]
        self.dual_basis_exact = _fraction_inverse_transpose(Hfrac)
        self.dual_basis = np.array([[float(f) for f in row] for row in self.dual_basis_exact])
        # coordinate map: column j of Pmap is p*_j
        self.coordinate_map = self.dual_basis.copy()

    def sigma_at(self, x) -> np.ndarray:
        """Permutation of coin indices realized at lattice site x."""
        x = np.asarray(x, dtype=int)
        key = tuple(int(x[j]) % self.orders[j] for j in range(self.d))
        return self._box_sigma[key]

    def coset_index(self, x) -> int:
        """Index into base_cell of the coset of x modulo Gamma."""
        sig = self.sigma_at(x)
        return self._coset_of_sigma[tuple(int(v) for v in sig)]

    def is_trivial(self) -> bool:
        return self.n_cosets == 1


def _fraction_inverse_transpose(rows):
    """Exact inverse-transpose of a small square Fraction matrix (Gauss-Jordan)."""
    d = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(d)] for i, r in enumerate(rows)]
    for col in range(d):
        piv = next(r for r in range(col, d) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(d):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    inv = [[aug[i][d + j] for j in range(d)] for i in range(d)]
    # transpose: dual vector j is row j of inv => store as columns
    return [[inv[j][i] for j in range(d)] for i in range(d)]


@dataclass
class WalkModel:
    """A complete walk instance: jumps, coin ensemble, site action, initial state.

    `phi0` is a normalized coin vector for a walker localized at the origin;
    alternatively `kernel` holds a finitely supported density-matrix kernel as
    a dict {(x_tuple, y_tuple): 2d x 2d matrix}.
    """

    jump: JumpFunction
    coins: CoinEnsemble
    site: SiteRepresentation
    phi0: np.ndarray | None = None
    kernel: dict | None = None
    expect: dict = field(default_factory=dict)  # fixture metadata for `verify`

    def __post_init__(self):
        if self.coins.coins.shape[1] != 2 * self.jump.d:
            raise ConfigError("coins", "coin dimension must equal 2d")
        if self.site.F != self.coins.F:
            raise ConfigError("sigma_generators", "site representation acts on wrong coin count")
        if self.phi0 is not None:
            self.phi0 = np.asarray(self.phi0, dtype=complex).reshape(2 * self.jump.d)
        if self.phi0 is None and self.kernel is None:
            raise ConfigError("initial", "need either a coin vector or a density kernel")

    @property
    def d(self) -> int:
        return self.jump.d

    @property
    def F(self) -> int:
        return self.coins.F


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "residual": c.residual, "detail": c.detail}
                for c in self.checks
            ],
        }

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_model(model: WalkModel) -> ValidationReport:
    """Run every structural invariant; the model is accepted iff all pass."""
    checks = []
    jump, coins, site = model.jump, model.coins, model.site

    res = float(np.max(np.abs(jump.r))) - jump.rho
    checks.append(CheckResult("jump_range", res <= 0, max(res, 0.0)))

    for i, r in enumerate(coins.unitarity_residuals()):
        checks.append(CheckResult(f"coin_unitary[{i}]", r <= FLOAT_TOL, r))
    r = coins.row_sum_residual()
    checks.append(CheckResult("P_row_stochastic", r <= FLOAT_TOL, r))
    pmin = float(np.min(coins.p))
    checks.append(CheckResult("p_positive", pmin > 0, max(0.0, -pmin), f"min p = {pmin}"))
    r = abs(float(coins.p.sum()) - 1.0)
    checks.append(CheckResult("p_normalized", r <= FLOAT_TOL, r))
    r = coins.stationarity_residual()
    checks.append(CheckResult("p_stationary", r <= FLOAT_TOL, r))
    r = coins.q_row_sum_residual()
    checks.append(CheckResult("Q_row_stochastic", r <= FLOAT_TOL, r))

    # generators commute pairwise
    res = 0
    for a, b in itertools.combinations(site.generators, 2):
        res = max(res, int(np.max(np.abs(a[b] - b[a]))))
    checks.append(CheckResult("sigma_commuting", res == 0, float(res)))
    # measure preservation and kernel invariance
    mres = 0.0
    kres = 0.0
    for g in site.generators:
        mres = max(mres, float(np.max(np.abs(coins.p[g] - coins.p))))
        kres = max(kres, float(np.max(np.abs(coins.P[np.ix_(g, g)] - coins.P))))
    checks.append(CheckResult("sigma_measure_preserving", mres <= FLOAT_TOL, mres))
    checks.append(CheckResult("sigma_kernel_invariant", kres <= FLOAT_TOL, kres))
    # duality p*_j . gamma_i = delta_ij, checked in exact arithmetic
    dual_ok = True
    for j in range(site.d):
        for i in range(site.d):
            acc = sum(
                site.dual_basis_exact[m][j] * Fraction(int(site.gamma_basis[m, i]))
                for m in range(site.d)
            )
            if acc != (1 if i == j else 0):
                dual_ok = False
    checks.append(CheckResult("gamma_duality_exact", dual_ok, 0.0 if dual_ok else 1.0))
    det = round(abs(float(np.linalg.det(site.gamma_basis))))
    checks.append(
        CheckResult("base_cell_count", det == site.n_cosets, float(abs(det - site.n_cosets)))
    )

    if model.phi0 is not None:
        r = abs(float(np.linalg.norm(model.phi0)) - 1.0)
        checks.append(CheckResult("phi0_normalized", r <= FLOAT_TOL, r))
    if model.kernel is not None:
        hres, tr = 0.0, 0.0
        for (x, y), mat in model.kernel.items():
            mat = np.asarray(mat)
            partner = model.kernel.get((y, x))
            if partner is None:
                hres = max(hres, float(np.max(np.abs(mat))))
            else:
                hres = max(hres, float(np.max(np.abs(mat.conj().T - np.asarray(partner)))))
            if x == y:
                tr += float(np.trace(mat).real)
        checks.append(CheckResult("kernel_selfadjoint", hres <= FLOAT_TOL, hres))
        checks.append(CheckResult("kernel_trace_one", abs(tr - 1.0) <= 1e-10, abs(tr - 1.0)))
        psd = _kernel_psd_residual(model)
        checks.append(CheckResult("kernel_psd", psd <= 1e-10, psd))
    return ValidationReport(checks)


def _kernel_psd_residual(model: WalkModel) -> float:
    sites = sorted({x for x, _ in model.kernel} | {y for _, y in model.kernel})
    idx = {s: i for i, s in enumerate(sites)}
    m = 2 * model.d
    big = np.zeros((len(sites) * m, len(sites) * m), dtype=complex)
    for (x, y), mat in model.kernel.items():
        i, j = idx[x], idx[y]
        big[i * m : (i + 1) * m, j * m : (j + 1) * m] = np.asarray(mat, dtype=complex)
    ev = np.linalg.eigvalsh((big + big.conj().T) / 2)
    return float(max(0.0, -ev.min()))


def compute_gamma(site: SiteRepresentation):
    """(Gamma basis columns, base cell, exact dual basis columns as Fractions)."""
    return site.gamma_basis, site.base_cell, site.dual_basis_exact


def sigma_at(site: SiteRepresentation, x) -> np.ndarray:
    return site.sigma_at(x)


def check_trivial_commutant(coins: CoinEnsemble, tol: float = 1e-10):
    """Dimension of {A : A C = C A for all coins C}; trivial iff dimension 1."""
    m = coins.coins.shape[1]
    eye = np.eye(m)
    rows = []
    for C in coins.coins:
        rows.append(np.kron(C, eye) - np.kron(eye, C.T))
    L = np.vstack(rows)
    s = np.linalg.svd(L, compute_uv=False)
    dim = int(np.sum(s <= tol * max(1.0, s[0]))) + (m * m - len(s) if len(s) < m * m else 0)
    return dim == 1, dim


@dataclass
class Section7Report:
    jumps_in_gamma: bool
    kernel_rank_one: bool
    trivial_commutant: bool
    commutant_dim: int

    @property
    def certified(self) -> bool:
        """All three conditions: the peripheral-spectrum hypothesis holds on the
        cyclic subspace and the diffusion matrix restricted there is p-independent."""
        return self.jumps_in_gamma and self.kernel_rank_one and self.trivial_commutant

    def as_dict(self):
        return {
            "jumps_in_gamma": self.jumps_in_gamma,
            "kernel_rank_one": self.kernel_rank_one,
            "trivial_commutant": self.trivial_commutant,
            "commutant_dim": self.commutant_dim,
            "certified": self.certified,
        }


def check_section7_conditions(model: WalkModel) -> Section7Report:
    """Three sufficient conditions certifying the spectral gap hypothesis."""
    site, coins, jump = model.site, model.coins, model.jump
    # (i) all jump differences lie in Gamma
    ok_jumps = True
    for a in range(2 * model.d):
        for b in range(2 * model.d):
            diff = jump.r[a] - jump.r[b]
            if site.coset_index(diff) != site.coset_index(np.zeros(model.d, dtype=int)):
                ok_jumps = False
    # (ii) kernel rows identical: P(eta, zeta) = p(zeta)
    ok_kernel = float(np.max(np.abs(coins.P - coins.p[None, :]))) <= FLOAT_TOL
    # (iii) trivial commutant
    triv, dim = check_trivial_commutant(coins)
    return Section7Report(ok_jumps, ok_kernel, triv, dim)
