import numpy as np
import pytest

from conftest import random_params
from trivirus.equilibria import PreconditionError, single_virus_equilibrium
from trivirus.families import (
    ATTRACTIVE,
    INCONCLUSIVE,
    UNSTABLE,
    build_line_family,
    build_plane_family,
    build_plane_general,
    build_plane_identical,
    distance_to_family,
    line_jacobian_structure,
    make_stochastic_like_c,
    plane_diagnostics,
    plane_matrices,
)
from trivirus.model import rhs
from trivirus.presets import FIVE_NODE_B, four_node_matrices
from trivirus.sim import SimConfig, integrate, paper_random_initial_condition
from trivirus.spectral import perron_vectors, spectral_radius


def _line(b13):
    B1, B2, B3 = four_node_matrices(b3_13=b13)
    return build_line_family(B1, B2, B3)


def test_stochastic_like_c_cycle():
    M = np.roll(np.eye(4), 1, axis=1) * 2.5
    z = np.full(4, 1 / 3)
    C = make_stochastic_like_c(z, M)
    assert np.max(np.abs(C @ z - z)) < 1e-14
    assert np.array_equal(C > 0, M > 0)


def test_stochastic_like_c_fixed_point_is_identity_map():
    M = np.array([[0.0, 1.0], [1.0, 0.0]])
    z = np.array([0.3, 0.3])
    assert np.array_equal(make_stochastic_like_c(z, M), M)


def test_stochastic_like_c_unit_radius(rng):
    for _ in range(20):
        M = random_params(rng, int(rng.integers(2, 7))).beta[0]
        _, v, _ = perron_vectors(M)
        C = make_stochastic_like_c(v * rng.uniform(0.1, 5.0), M)
        assert spectral_radius(C) == pytest.approx(1.0, abs=1e-10)


def test_stochastic_like_c_rejects_bad_inputs():
    with pytest.raises(ValueError):
        make_stochastic_like_c(np.array([0.0, 1.0]), np.ones((2, 2)))
    with pytest.raises(ValueError):
        make_stochastic_like_c(np.ones(2), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_line_example2_unstable():
    fam = _line(0.05)
    assert np.max(np.abs(fam.z - 1 / 3)) < 1e-10
    assert fam.radius == pytest.approx(1.0043, abs=5e-4)
    assert fam.attractivity == UNSTABLE


def test_line_example3_attractive():
    fam = _line(-0.1)
    assert fam.radius == pytest.approx(0.9911, abs=5e-4)
    assert fam.attractivity == ATTRACTIVE


def test_line_inconclusive_at_unit_radius():
    B1, B2, B3 = four_node_matrices(b3_13=0.05)
    z = np.full(4, 1 / 3)
    B3 = B3 / spectral_radius((1 - z)[:, None] * B3)
    assert build_line_family(B1, B2, B3).attractivity == INCONCLUSIVE


def test_line_invariants_and_reduction():
    B1, B2, B3 = four_node_matrices(b3_13=-0.1)
    fam = build_line_family(B1, B2, B3)
    z = fam.z
    assert np.max(np.abs(-z + (1 - z) * (B1 @ z))) < 1e-10
    assert np.max(np.abs((1 - z) * (fam.B2 @ z) - z)) < 1e-10
    # The printed B2 is recovered from its own pattern.
    assert np.allclose(fam.B2, B2, atol=1e-14)
    # Using B1 as the pattern gives back B1 (the identical-virus case).
    assert np.allclose(build_line_family(B1, B1, B3).B2, B1, atol=1e-14)


def test_line_residual_fine_grid(rng):
    for _ in range(10):
        n = int(rng.integers(2, 6))
        p = random_params(rng, n, scale=3.0)
        B1 = p.beta[0] + 2 * np.eye(n)
        fam = build_line_family(B1, p.beta[1], p.beta[2])
        for b in np.linspace(0, 1, 101):
            assert np.max(np.abs(rhs(fam.params, fam.point(b)))) < 1e-9


def test_line_jacobian_structure_attractive():
    fam = _line(-0.1)
    for b in np.linspace(0.05, 0.95, 10):
        zeros, rest = line_jacobian_structure(fam, b)
        assert zeros == 1
        assert rest < -1e-7


def test_line_requires_unit_healing():
    B1, B2, B3 = four_node_matrices()
    with pytest.raises(PreconditionError):
        build_line_family(B1, B2, B3, delta=np.full(4, 2.0))


def test_line_requires_endemic_b1():
    B1, B2, B3 = four_node_matrices()
    with pytest.raises(PreconditionError):
        build_line_family(B1 * 0.5, B2, B3)


def test_line_projection():
    fam = _line(-0.1)
    d, b = fam.project(fam.point(0.5))
    assert d == 0.0 and b == 0.5
    d, b = fam.project(fam.point(1.0) + np.array([0.1, 0, 0, 0] + [0] * 8).reshape(3, 4))
    assert b == 1.0 and d == pytest.approx(0.1)


def test_plane_identical_example5():
    fam = build_plane_identical(FIVE_NODE_B)
    assert np.allclose(fam.anchor, [0.691, 0.610, 0.758, 0.078, 0.051], atol=5e-4)
    x = fam.point([1, 0, 0])
    assert np.array_equal(x[0], fam.anchor) and np.all(x[1:] == 0)
    assert distance_to_family(fam, np.array([fam.anchor] * 3) / 3) == pytest.approx(0.0, abs=1e-15)


def test_plane_general_example4():
    B1, B2, B3 = four_node_matrices()
    fam = build_plane_family("general", B1=B1, M=B2, M_hat=B3)
    assert np.max(np.abs(fam.anchor - 1 / 3)) < 1e-10
    assert np.allclose(fam.params.beta[1], B2) and np.allclose(fam.params.beta[2], B3)
    for x in fam.sample(10, seed=7):
        assert np.max(np.abs(rhs(fam.params, x))) < 1e-9


def test_plane_general_rejects_equal_patterns():
    B1, B2, _ = four_node_matrices()
    with pytest.raises(ValueError):
        build_plane_general(B1, B2, 3 * B2)


def test_plane_unknown_mode():
    with pytest.raises(ValueError):
        build_plane_family("other", B=FIVE_NODE_B)


def test_plane_distance_along_normal(rng):
    fam = build_plane_identical(FIVE_NODE_B)
    w = fam.anchor
    base = fam.point([0.3, 0.3, 0.4])
    dirs = np.array([np.kron(np.eye(3)[a] - np.eye(3)[2], w) for a in range(2)]).T
    u = rng.normal(size=15)
    u -= dirs @ np.linalg.lstsq(dirs, u, rcond=None)[0]
    u /= np.linalg.norm(u)
    d = distance_to_family(fam, base + 0.01 * u.reshape(3, 5))
    assert d == pytest.approx(0.01, abs=1e-9)


def test_plane_projection_alpha_on_simplex(rng):
    fam = build_plane_identical(FIVE_NODE_B)
    for _ in range(50):
        x = rng.uniform(0, 0.3, (3, 5))
        _, alpha = fam.project(x)
        assert np.all(alpha >= 0) and alpha.sum() == pytest.approx(1.0, abs=1e-12)


def test_q_bar_positive_semidefinite():
    fam = build_plane_identical(FIVE_NODE_B)
    Q, u, P, R, Q_bar = plane_matrices(fam)
    assert np.allclose(Q_bar, Q_bar.T)
    ev = np.linalg.eigvalsh(Q_bar)
    assert ev[0] == pytest.approx(0.0, abs=1e-9) and ev[1] > 0
    assert np.max(np.abs(Q_bar @ fam.anchor)) < 1e-9
    assert np.all(u > 0) and u @ fam.anchor == pytest.approx(1.0)
    assert np.max(np.abs(R @ fam.anchor)) < 1e-12


def test_plane_diagnostics_example5_decay():
    fam = build_plane_identical(FIVE_NODE_B)
    traj = integrate(fam.params, paper_random_initial_condition(5, seed=1), SimConfig())
    d = plane_diagnostics(fam, traj)
    assert d.lambda2 > 0
    assert np.all(d.V[:, -1] < 1e-12)
    assert d.orthogonality < 1e-9
    assert all(s is not None and s < 0 for s in d.slopes)


def test_plane_diagnostics_on_plane_start():
    fam = build_plane_identical(FIVE_NODE_B)
    traj = integrate(fam.params, fam.point([0.2, 0.3, 0.5]), SimConfig(horizon=100, window=200))
    d = plane_diagnostics(fam, traj)
    assert d.V[:, 0].max() < 1e-12 and d.V.max() < 1e-12


def test_plane_diagnostics_needs_samples():
    fam = build_plane_identical(FIVE_NODE_B)
    traj = integrate(fam.params, paper_random_initial_condition(5, seed=1), SimConfig(horizon=20))
    with pytest.raises(ValueError):
        plane_diagnostics(fam, traj)


def test_plane_diagnostics_identical_only():
    B1, B2, B3 = four_node_matrices()
    with pytest.raises(ValueError):
        plane_matrices(build_plane_general(B1, B2, B3))


def test_identical_plane_allows_general_healing():
    delta = np.array([1.0, 2.0, 0.5, 1.0, 1.0])
    fam = build_plane_identical(FIVE_NODE_B, delta)
    assert np.allclose(fam.anchor, single_virus_equilibrium(delta, FIVE_NODE_B))
