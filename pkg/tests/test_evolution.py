import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqwalk import evolution as ev
from mqwalk.errors import BudgetExceededError

from conftest import HAD, I2, X, flip_model, make_model, sigma2_model


def test_identity_coin_shifts_deterministically():
    m = make_model(1, [[1], [-1]], [I2], [1.0], [[1.0]])
    dist = ev.distribution_for_path(m, ev.PathSample(np.zeros(5, dtype=int), 1.0))
    assert dist == {(5,): pytest.approx(1.0)}


def test_hadamard_one_step_splits_half_half():
    m = make_model(1, [[1], [-1]], [HAD], [1.0], [[1.0]])
    dist = ev.distribution_for_path(m, ev.PathSample(np.zeros(1, dtype=int), 1.0))
    assert dist[(1,)] == pytest.approx(0.5)
    assert dist[(-1,)] == pytest.approx(0.5)


def test_hadamard_two_steps_match_path_enumeration():
    # oracle: enumerate the 4 internal paths of the product formula by hand
    m = make_model(1, [[1], [-1]], [HAD], [1.0], [[1.0]])
    amps = {}
    for t1, t2 in itertools.product(range(2), repeat=2):
        pos = (1 - 2 * t1) + (1 - 2 * t2)
        amp = HAD[t2, t1] * HAD[t1, 0]
        amps[(pos, t2)] = amps.get((pos, t2), 0) + amp
    expected = {}
    for (pos, _), a in amps.items():
        expected[pos] = expected.get(pos, 0.0) + abs(a) ** 2
    dist = ev.distribution_for_path(m, ev.PathSample(np.zeros(2, dtype=int), 1.0))
    for pos, pr in expected.items():
        if pr > 0:
            assert dist[(pos,)] == pytest.approx(pr, abs=1e-12)
    assert expected[2] == pytest.approx(0.25)
    assert expected[0] == pytest.approx(0.5)
    assert expected[-2] == pytest.approx(0.25)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_norm_preserved_along_random_paths(seed, n):
    m = sigma2_model()
    path = ev.sample_markov_path(m.coins, n, seed=seed)
    dist = ev.distribution_for_path(m, path)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-10)


def test_finite_speed_support():
    m = flip_model(0.5)
    path = ev.sample_markov_path(m.coins, 6, seed=7)
    dist = ev.distribution_for_path(m, path)
    assert all(abs(k[0]) <= 6 for k in dist)


def test_sample_markov_path_deterministic_and_weighted():
    m = flip_model(0.3)
    a = ev.sample_markov_path(m.coins, 10, seed=42)
    b = ev.sample_markov_path(m.coins, 10, seed=42)
    assert np.array_equal(a.steps, b.steps)
    assert a.weight == pytest.approx(ev.path_weight(m.coins, a.steps))


def test_constant_path_for_singleton_and_absorbing():
    m = make_model(1, [[1], [-1]], [I2], [1.0], [[1.0]])
    path = ev.sample_markov_path(m.coins, 8, seed=1)
    assert np.all(path.steps == 0) and path.weight == 1.0

    m2 = make_model(1, [[1], [-1]], [I2, X], [0.4, 0.6], np.eye(2))
    path2 = ev.sample_markov_path(m2.coins, 8, seed=3)
    assert np.all(path2.steps == path2.steps[0])
    assert path2.weight == pytest.approx(m2.coins.p[path2.steps[0]])


def test_iid_state_frequencies_within_3sigma():
    p = np.array([0.3, 0.7])
    m = make_model(1, [[1], [-1]], [I2, X], p, np.tile(p, (2, 1)))
    n = 10**5
    path = ev.sample_markov_path(m.coins, n, seed=11)
    freq = np.bincount(path.steps, minlength=2) / n
    for i in range(2):
        sig = np.sqrt(p[i] * (1 - p[i]) / n)
        assert abs(freq[i] - p[i]) < 3 * sig


def test_brute_force_n0_and_weighted_average():
    m = make_model(1, [[1], [-1]], [I2, X], [0.25, 0.75], np.tile([0.25, 0.75], (2, 1)),
                   phi0=np.array([1, 0], dtype=complex))
    d0 = ev.averaged_distribution_bruteforce(m, 1)
    # identity coin keeps |+1> (moves +1), swap sends it to coin -1 (moves -1)
    assert d0[(1,)] == pytest.approx(0.25)
    assert d0[(-1,)] == pytest.approx(0.75)


def test_brute_force_budget_error():
    m = flip_model(0.5)
    with pytest.raises(BudgetExceededError):
        ev.averaged_distribution_bruteforce(m, 10, budget=100)


def test_brute_force_matches_monte_carlo_3sigma():
    m = flip_model(0.35)
    n, trials = 5, 4000
    exact = ev.averaged_distribution_bruteforce(m, n)
    mc = ev.monte_carlo_distribution(m, n, trials, seed=5)
    for k, pr in exact.items():
        if pr < 1e-12:
            continue
        sig = np.sqrt(pr * (1 - pr) / trials)
        assert abs(mc.get(k, 0.0) - pr) < max(3 * sig, 5e-3), k


def test_brute_force_total_mass_one(flip03):
    dist = ev.averaged_distribution_bruteforce(flip03, 6)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-10)


def test_charfn_trivial_values():
    assert ev.characteristic_function_empirical({(3,): 1.0}, 0.7) == pytest.approx(
        np.exp(1j * 2.1)
    )
    dist = {(1,): 0.5, (-1,): 0.5}
    val = ev.characteristic_function_empirical(dist, 0.0)
    assert val == pytest.approx(1.0)
    assert abs(ev.characteristic_function_empirical(dist, 0.9).imag) < 1e-14


def test_d2_evolution_norm_and_cone():
    from conftest import d2_model

    m = d2_model()
    path = ev.sample_markov_path(m.coins, 3, seed=0)
    dist = ev.distribution_for_path(m, path)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-10)
    assert all(max(abs(k[0]), abs(k[1])) <= 3 for k in dist)
