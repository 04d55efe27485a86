"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""

import functools
import time

import numpy as np

from conftest import preset_params, random_params
from trivirus import conditions as cond
from trivirus.equilibria import (
    bivirus_coexistence,
    enumerate_equilibria,
    genericity_probe,
    single_virus_equilibrium,
)
from trivirus.families import build_line_family, build_plane_identical
from trivirus.model import jacobian, rhs
from trivirus.presets import FIVE_NODE_B, four_node_matrices, get_preset
from trivirus.scenario import _polish, initial_condition
from trivirus.sim import GUARD, SimConfig, integrate, paper_random_initial_condition
from trivirus.spectral import spectral_abscissa, spectral_radius

RESULTS = []
PROPERTY_TIMES = {}
LONG = SimConfig(horizon=50000.0)


def _criterion(label, runtime_limit=None, property_suite=False):
    """Time the test body, enforce the runtime limit and log one line."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            outcome, detail = "PASS", ""
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                if runtime_limit is not None:
                    assert elapsed < runtime_limit, f"runtime {elapsed:.2f}s exceeds {runtime_limit}s"
            except Exception as exc:
                outcome, detail = "FAIL", f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
                raise
            finally:
                elapsed = time.perf_counter() - start
                if property_suite:
                    PROPERTY_TIMES[label] = elapsed
                RESULTS.append(f"{outcome}  criterion {label} [{elapsed:.2f}s]{detail}")
                print(RESULTS[-1])

        return run

    return wrap


def _boundary(params, k):
    x = np.zeros((params.m, params.n))
    x[k] = single_virus_equilibrium(params.delta[k], params.beta[k])
    return x


def _limit(params, traj):
    assert traj.converged, traj.termination
    eq = _polish(params, traj.final)
    assert eq is not None
    return eq


@_criterion("1 (Example 1 radii and boundary verdicts)", runtime_limit=1.0)
def test_criterion_1_example1_radii(ex1):
    p = ex1
    expected = {0: {1: 0.9829, 2: 0.99624}, 1: {0: 1.0174, 2: 1.0127}, 2: {0: 1.003, 1: 0.9863}}
    for k, radii in expected.items():
        got = cond.invasion_radii(p, k)
        for j, v in radii.items():
            assert abs(got[j] - v) < 5e-4, (k, j, got[j], v)
    verdicts = [cond.check_boundary_stability(p, k).verdict for k in range(3)]
    assert verdicts == [cond.STABLE, cond.UNSTABLE, cond.UNSTABLE]


@_criterion("2 (Example 5 plane convergence)", runtime_limit=10.0)
def test_criterion_2_example5_plane():
    fam = build_plane_identical(FIVE_NODE_B)
    assert np.max(np.abs(fam.anchor - [0.691, 0.610, 0.758, 0.078, 0.051])) < 5e-4
    alphas = []
    for seed in (1, 2):
        traj = integrate(fam.params, paper_random_initial_condition(5, seed=seed), LONG)
        assert traj.converged
        dist, alpha = fam.project(traj.final)
        assert dist < 1e-6
        assert abs(alpha.sum() - 1) < 1e-6
        alphas.append(alpha)
    assert np.max(np.abs(alphas[0] - alphas[1])) > 1e-3


@_criterion("3 (Examples 2/3 line family)", runtime_limit=30.0)
def test_criterion_3_line_families():
    B1, B2, B3 = four_node_matrices(b3_13=0.05)
    ex2 = build_line_family(B1, B2, B3)
    B3b = four_node_matrices(b3_13=-0.1)[2]
    ex3 = build_line_family(B1, B2, B3b)
    assert abs(ex2.radius - 1.0043) < 5e-4 and ex2.attractivity == "unstable"
    assert abs(ex3.radius - 0.9911) < 5e-4 and ex3.attractivity == "attractive"
    assert np.max(np.abs(ex2.z - 1 / 3)) < 1e-10 and np.max(np.abs(ex3.z - 1 / 3)) < 1e-10

    x0 = paper_random_initial_condition(4, seed=1)
    traj3 = integrate(ex3.params, x0, LONG)
    assert traj3.converged and ex3.project(traj3.final)[0] < 1e-6

    traj2 = integrate(ex2.params, x0, LONG)
    assert traj2.converged
    target = _boundary(ex2.params, 2)
    assert np.max(np.abs(traj2.final - target)) < 1e-6


@_criterion("4 (Example 6 no 3-coexistence)")
def test_criterion_4_example6():
    p = preset_params("example6")
    r = cond.check_nonexistence_3coexistence(p)
    assert r.holds
    res = enumerate_equilibria(p, starts=200)
    assert res.starts_used >= 200
    assert res.of_kind("3-coexistence") == []
    traj = integrate(p, paper_random_initial_condition(5, seed=1), LONG)
    assert traj.converged
    assert np.max(np.abs(traj.final - _boundary(p, 2))) < 1e-6


@_criterion("5 (Example 7 weaker ordering, 2-coexistence limit)")
def test_criterion_5_example7():
    p = preset_params("example7")
    assert cond.check_nonexistence_2coexistence(p).holds
    assert not cond.check_nonexistence_3coexistence(p).holds
    traj = integrate(p, paper_random_initial_condition(5, seed=1), LONG)
    eq = _limit(p, traj)
    assert eq.kind == "2-coexistence" and eq.alive == (1, 2)
    assert np.max(traj.final[0]) < 1e-8


@_criterion("6 (Example 8 3-coexistence)")
def test_criterion_6_example8():
    # Every sub-check is evaluated so a failure reports the whole picture.
    p = preset_params("example8")
    problems = []
    for k in range(3):
        radii = cond.invasion_radii(p, k)
        if not all(v > 1 for v in radii.values()):
            problems.append(f"boundary {k + 1} radii {({j + 1: round(v, 5) for j, v in radii.items()})}")
    two = []
    for i, j in ((0, 1), (0, 2), (1, 2)):
        two += bivirus_coexistence(p, i, j).equilibria
    if len(two) != 3:
        problems.append(f"2-coexistence equilibria {[e.describe() for e in two]}")
    if any(e.is_saturated for e in two):
        problems.append("a 2-coexistence equilibrium is saturated")
    three = enumerate_equilibria(p, starts=100).of_kind("3-coexistence")
    if len(three) % 2 != 1 or not all(e.is_saturated for e in three):
        problems.append(f"{len(three)} 3-coexistence equilibria")
    eq = _limit(p, integrate(p, paper_random_initial_condition(5, seed=1), LONG))
    if eq.kind != "3-coexistence":
        problems.append(f"limit {eq.describe()}")
    assert not problems, "; ".join(problems)


@_criterion("7 (Example 9 two stable 2-coexistence equilibria)")
def test_criterion_7_example9():
    config = get_preset("example9")
    p = preset_params("example9")
    limits = []
    for item in config["plan"]:
        if item["action"] != "simulate":
            continue
        x0 = initial_condition(p, item["ic"], config["seed"])
        eq = _limit(p, integrate(p, x0, LONG))
        assert eq.kind == "2-coexistence" and eq.abscissa < -1e-8
        limits.append(eq)
    assert len(limits) == 2
    assert {limits[0].alive, limits[1].alive} == {(0, 2), (1, 2)}
    assert np.max(np.abs(limits[0].state - limits[1].state)) > 1e-3


@_criterion("8a (domain invariance, 1000 random systems)", property_suite=True)
def test_criterion_8a_domain_invariance():
    rng = np.random.default_rng(2024)
    cfg = SimConfig(horizon=5.0, sample_dt=0.25)
    trips = 0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        p = random_params(rng, n)
        traj = integrate(p, paper_random_initial_condition(n, rng=rng), cfg)
        trips += traj.termination == GUARD
        late = traj.states[traj.times >= 0.1]
        assert np.all(late > 0) and np.all(late.sum(axis=1) < 1)
    assert trips == 0


@_criterion("8b (Jacobian vs finite differences)", property_suite=True)
def test_criterion_8b_jacobian():
    rng = np.random.default_rng(7)
    worst, h = 0.0, 1e-6
    for _ in range(100):
        n = int(rng.integers(2, 7))
        p = random_params(rng, n)
        share = rng.uniform(size=(n, 4))
        x = (share / share.sum(axis=1, keepdims=True))[:, :3].T.ravel()
        J = jacobian(p, x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = h
            fd = (rhs(p, (x + e).reshape(3, n)) - rhs(p, (x - e).reshape(3, n))).ravel() / (2 * h)
            worst = max(worst, np.max(np.abs(fd - J[:, j])))
    assert worst < 1e-5


@_criterion("8c (Metzler sign equivalence, 500 draws)", property_suite=True)
def test_criterion_8c_sign_equivalence():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 500:
        n = int(rng.integers(2, 9))
        N = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.5)
        perm = rng.permutation(n)
        N[perm, np.roll(perm, -1)] += rng.uniform(0.05, 1.0, n)
        L = -np.diag(rng.uniform(0.2, 2.0, n))
        s = spectral_abscissa(L + N)
        r = spectral_radius(-np.linalg.solve(L, N))
        if abs(s) < 1e-9 or abs(r - 1) < 1e-9:
            continue
        assert np.sign(s) == np.sign(r - 1)
        checked += 1


@_criterion("8d (sign-graph consistency)", property_suite=True)
def test_criterion_8d_sign_graph():
    rng = np.random.default_rng(13)
    for _ in range(300):
        p = random_params(rng, int(rng.integers(1, 7)))
        assert not cond.is_sign_consistent(cond.jacobian_sign_graph(p))
        for pair in ([0, 1], [0, 2], [1, 2]):
            assert cond.is_sign_consistent(cond.jacobian_sign_graph(p.subsystem(pair)))


@_criterion("8e (saturated index sum = +1)", property_suite=True)
def test_criterion_8e_index_sum():
    rng = np.random.default_rng(17)
    counted = 0
    while counted < 50:
        p = random_params(rng, int(rng.integers(1, 4)))
        res = enumerate_equilibria(p, starts=30)
        if not (res.nondegenerate and res.complete):
            continue
        assert res.index_sum_saturated == 1
        assert sum(e.index for e in res.saturated()) == 1
        counted += 1


@_criterion("8f (genericity probe on Example 4)", property_suite=True)
def test_criterion_8f_genericity():
    p = preset_params("example4")
    assert enumerate_equilibria(p, starts=20).continuum_suspected
    rep = genericity_probe(p, trials=100, scale=0.05, seed=0, starts=20)
    assert rep.trials == 100
    assert rep.degenerate_fraction == 0.0 and rep.continuum_fraction == 0.0
    assert all(np.isfinite(c) and c > 0 for c in rep.counts)


@_criterion("8g (low-dimension propositions)", property_suite=True)
def test_criterion_8g_low_dimension():
    rng = np.random.default_rng(19)
    for _ in range(200):
        for e in enumerate_equilibria(random_params(rng, 1), starts=5).equilibria:
            assert len(e.alive) <= 1
    for _ in range(200):
        assert enumerate_equilibria(random_params(rng, 2), starts=5).of_kind("3-coexistence") == []


@_criterion("8 (property-suite total runtime < 5 min)")
def test_criterion_8_total_runtime():
    assert len(PROPERTY_TIMES) == 7, "run the full property suite first"
    total = sum(PROPERTY_TIMES.values())
    assert total < 300.0, f"{total:.1f}s"
