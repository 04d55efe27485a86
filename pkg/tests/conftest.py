import numpy as np
import pytest

from trivirus.model import TriVirusParams
from trivirus.presets import FIVE_NODE_B, four_node_matrices, get_preset, unit_outer


def random_params(rng, n, m=3, density=0.7, scale=2.0):
    """Random system with irreducible infection matrices.

    A random Hamiltonian cycle is added to every ``B^k`` so each layer is
    strongly connected regardless of the random sparsity pattern.
    """
    B = rng.uniform(0, scale, (m, n, n)) * (rng.uniform(size=(m, n, n)) < density)
    for k in range(m):
        B[k] += np.diag(rng.uniform(0, 1, n))
        perm = rng.permutation(n)
        for i in range(n):
            B[k, perm[i], perm[(i + 1) % n]] += rng.uniform(0.1, 1.0)
    delta = rng.uniform(0.5, 1.5, (m, n))
    return TriVirusParams(delta, B)


def random_interior_state(rng, m, n):
    p = rng.uniform(size=(n, m + 1))
    p /= p.sum(axis=1, keepdims=True)
    return np.ascontiguousarray(p[:, :m].T)


def preset_params(name):
    from trivirus.scenario import _build

    return _build(get_preset(name))[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ex1():
    return TriVirusParams.from_matrices(four_node_matrices(b2_12=-0.1, b3_22=-0.1, b3_31=0.1))


@pytest.fixture
def ex5():
    return TriVirusParams.from_matrices([FIVE_NODE_B] * 3)


@pytest.fixture
def ex6():
    B2 = FIVE_NODE_B + 0.5 * unit_outer(1, 4)
    return TriVirusParams.from_matrices([FIVE_NODE_B, B2, B2 + 0.1 * unit_outer(5, 1)])


@pytest.fixture
def ex7():
    B = FIVE_NODE_B
    return TriVirusParams.from_matrices([B, B + 2 * unit_outer(1, 4), B + 0.1 * unit_outer(5, 1)])


@pytest.fixture
def ex8():
    B = FIVE_NODE_B
    return TriVirusParams.from_matrices([B + 0.7 * unit_outer(3, 2), B + 2 * unit_outer(1, 4), B + 0.1 * unit_outer(5, 1)])


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
