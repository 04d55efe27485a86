"""The nine reference scenarios as scenario configurations.

All presets use unit healing rates. Examples 1 to 4 share a 4-node set of
infection matrices with four adjustable entries; Examples 5 to 8 perturb
one 5-node matrix by rank-one terms; Example 9 assembles 2x2 blocks.
"""

from __future__ import annotations

import copy

import numpy as np

# 4-node matrices; the knobs add to the (1,2) entry of B2 and the (1,3),
# (2,2), (3,1) entries of B3.
_CYCLE_FWD = [[0, 0, 0, 1.5], [1.5, 0, 0, 0], [0, 1.5, 0, 0], [0, 0, 1.5, 0]]


def four_node_matrices(b2_12=0.0, b3_13=0.0, b3_22=0.0, b3_31=0.0) -> list:
    B1 = np.array(_CYCLE_FWD, dtype=float)
    B2 = np.array([[0, 1.5 + b2_12, 0, 0], [0, 0, 1.5, 0], [0, 0, 0, 1.5], [1.5, 0, 0, 0]], dtype=float)
    B3 = np.array(
        [[1, 0, 0.5 + b3_13, 0], [0, 1 + b3_22, 0.5, 0], [0, 0.5, 0, 1], [0.3 + b3_31, 0, 1.2, 0]],
        dtype=float,
    )
    return [B1, B2, B3]


FIVE_NODE_B = np.array(
    [
        [1, 0, 2, 0, 0.5],
        [0.5, 2, 0, 0, 0],
        [0, 5, 0.1, 0, 0],
        [0.1, 0, 0, 0.2, 0],
        [0, 0, 0, 0.1, 0.9],
    ],
    dtype=float,
)


def unit_outer(i: int, j: int, n: int = 5) -> np.ndarray:
    """``e_i e_j^T`` with 1-based indices."""
    E = np.zeros((n, n))
    E[i - 1, j - 1] = 1.0
    return E


B11 = np.array([[1.6, 1], [1, 1.6]])
B12 = np.array([[2.1, 0.156], [3.0659, 1.1]])
B21 = np.array([[1.7, 1], [1.2, 0.5]])
B22 = np.array([[1.6, 1], [1.2, 0]])
COUPLING = 0.001 * np.ones((2, 2))


def _blocks(top: np.ndarray, bottom: np.ndarray) -> np.ndarray:
    return np.block([[top, COUPLING], [COUPLING, bottom]])


def _mat(M) -> list:
    return np.asarray(M, dtype=float).tolist()


def _params(mats) -> dict:
    return {"beta": [_mat(M) for M in mats]}


def _expect(name, key, op, value=None, tol=None) -> dict:
    e = {"name": name, "key": key, "op": op}
    if value is not None:
        e["value"] = value
    if tol is not None:
        e["tol"] = tol
    return e


RADIUS_TOL = 5e-4


def _z_is_third(n: int = 4) -> list:
    return [_expect(f"z entry {i + 1}", f"family.anchor.{i + 1}", "approx", 1.0 / 3.0, 1e-10) for i in range(n)]


LONG_SIM = {"horizon": 50000.0}


def _example1() -> dict:
    radii = {"1.2": 0.9829, "1.3": 0.99624, "2.1": 1.0174, "2.3": 1.0127, "3.1": 1.003, "3.2": 0.9863}
    expectations = [_expect(f"invasion radius {k}", f"radius.{k}", "approx", v, RADIUS_TOL) for k, v in radii.items()]
    expectations += [
        _expect("virus-1 boundary stable", "boundary.1.verdict", "eq", "stable"),
        _expect("virus-2 boundary unstable", "boundary.2.verdict", "eq", "unstable"),
        _expect("virus-3 boundary unstable", "boundary.3.verdict", "eq", "unstable"),
        _expect("limit is the virus-1 boundary equilibrium", "sim1.limit.label", "eq", "boundary[1]"),
    ]
    return {
        "description": "4 nodes; virus-1 boundary equilibrium is the only stable one",
        "params": _params(four_node_matrices(b2_12=-0.1, b3_22=-0.1, b3_31=0.1)),
        "sim": LONG_SIM,
        "plan": [
            {"action": "check"},
            {"action": "enumerate", "starts": 50},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": expectations,
    }


def _line(b3_13: float) -> dict:
    B1, B2, B3 = four_node_matrices(b3_13=b3_13)
    return {"type": "line", "B1": _mat(B1), "M": _mat(B2), "B3": _mat(B3)}


def _example2() -> dict:
    return {
        "description": "4 nodes; unstable line of equilibria, trajectories leave it for the virus-3 boundary",
        "family": _line(0.05),
        "sim": LONG_SIM,
        "plan": [
            {"action": "family"},
            {"action": "check"},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": [
            _expect("rho((I-Z)B3)", "family.radius", "approx", 1.0043, RADIUS_TOL),
            _expect("line attractivity", "family.attractivity", "eq", "unstable"),
            *_z_is_third(),
            _expect("limit is the virus-3 boundary equilibrium", "sim1.limit.label", "eq", "boundary[3]"),
        ],
    }


def _example3() -> dict:
    return {
        "description": "4 nodes; locally exponentially attractive line of equilibria",
        "family": _line(-0.1),
        "sim": LONG_SIM,
        "plan": [
            {"action": "family"},
            {"action": "check"},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": [
            _expect("rho((I-Z)B3)", "family.radius", "approx", 0.9911, RADIUS_TOL),
            _expect("line attractivity", "family.attractivity", "eq", "attractive"),
            *_z_is_third(),
            _expect("limit lies on the line", "sim1.limit.label", "eq", "line"),
            _expect("distance to line", "sim1.family_distance", "lt", 1e-6),
        ],
    }


def _example4() -> dict:
    B1, B2, B3 = four_node_matrices()
    return {
        "description": "4 nodes; plane of equilibria (a1 z, a2 z, a3 z) from two distinct pattern matrices",
        "family": {"type": "plane", "mode": "general", "B1": _mat(B1), "M": _mat(B2), "M_hat": _mat(B3)},
        "sim": LONG_SIM,
        "plan": [
            {"action": "family"},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
            {"action": "simulate", "id": "sim2", "ic": {"kind": "random", "seed": 2}},
        ],
        "expectations": [
            *_z_is_third(),
            _expect("first limit on the plane", "sim1.family_distance", "lt", 1e-6),
            _expect("second limit on the plane", "sim2.family_distance", "lt", 1e-6),
        ],
    }


def _example5() -> dict:
    xt = [0.691, 0.610, 0.758, 0.078, 0.051]
    expectations = [_expect(f"x~ entry {i + 1}", f"family.anchor.{i + 1}", "approx", v, RADIUS_TOL) for i, v in enumerate(xt)]
    for sid in ("sim1", "sim2"):
        expectations += [
            _expect(f"{sid} distance to plane", f"{sid}.family_distance", "lt", 1e-6),
            _expect(f"{sid} alpha sums to one", f"{sid}.alpha_sum", "approx", 1.0, 1e-6),
        ]
    expectations.append(_expect("plane limits differ", "family.alpha_spread", "gt", 1e-3))
    return {
        "description": "5 nodes; three identical viruses, convergence to two points of a plane of equilibria",
        "family": {"type": "plane", "mode": "identical", "B": _mat(FIVE_NODE_B)},
        "sim": LONG_SIM,
        "plan": [
            {"action": "family"},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
            {"action": "simulate", "id": "sim2", "ic": {"kind": "random", "seed": 2}},
        ],
        "expectations": expectations,
    }


def _example6() -> dict:
    B = FIVE_NODE_B
    B2 = B + 0.5 * unit_outer(1, 4)
    return {
        "description": "5 nodes; strict ordering B3 > B2 > B1, no 3-coexistence, virus-3 boundary stable",
        "params": _params([B, B2, B2 + 0.1 * unit_outer(5, 1)]),
        "sim": LONG_SIM,
        "plan": [
            {"action": "check"},
            {"action": "enumerate", "starts": 200},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": [
            _expect("strongest ordering holds", "nonexistence_3coexistence.holds", "eq", True),
            _expect("strongest ordering labelling", "nonexistence_3coexistence.permutation", "eq", [1, 2, 3]),
            _expect("no 3-coexistence equilibrium", "count.3-coexistence", "eq", 0),
            _expect("limit is the virus-3 boundary equilibrium", "sim1.limit.label", "eq", "boundary[3]"),
        ],
    }


def _example7() -> dict:
    B = FIVE_NODE_B
    return {
        "description": "5 nodes; virus 1 dominated by both others, convergence to 2-coexistence of viruses 2 and 3",
        "params": _params([B, B + 2 * unit_outer(1, 4), B + 0.1 * unit_outer(5, 1)]),
        "sim": LONG_SIM,
        "plan": [
            {"action": "check"},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": [
            _expect("weaker ordering holds", "nonexistence_2coexistence.holds", "eq", True),
            _expect("strongest ordering fails", "nonexistence_3coexistence.holds", "eq", False),
            _expect("limit is 2-coexistence of viruses 2 and 3", "sim1.limit.label", "eq", "2-coexistence[2,3]"),
            _expect("virus-1 block of the limit", "sim1.limit.block_max.1", "lt", 1e-8),
        ],
    }


def _example8() -> dict:
    B = FIVE_NODE_B
    return {
        "description": "5 nodes; all boundary and 2-coexistence equilibria invadable, expected convergence to 3-coexistence",
        "params": _params([B + 0.7 * unit_outer(3, 2), B + 2 * unit_outer(1, 4), B + 0.1 * unit_outer(5, 1)]),
        "sim": LONG_SIM,
        "plan": [
            {"action": "check"},
            {"action": "enumerate", "starts": 100, "bivirus": True},
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1}},
        ],
        "expectations": [
            _expect("all boundary radii above one", "saturated_existence.boundary_radii_above_one", "eq", True),
            _expect("three 2-coexistence equilibria", "count.2-coexistence", "eq", 3),
            _expect("all 2-coexistence equilibria unsaturated", "saturated_existence.unsaturated_2coexistence", "eq", True),
            _expect("odd number of 3-coexistence equilibria", "count.3-coexistence", "odd"),
            _expect("3-coexistence equilibria saturated", "all_3coexistence_saturated", "eq", True),
            _expect("limit is a 3-coexistence equilibrium", "sim1.limit.kind", "eq", "3-coexistence"),
        ],
    }


def _example9() -> dict:
    return {
        "description": "4 nodes in two weakly coupled pairs; two stable 2-coexistence equilibria with separate basins",
        "params": _params([_blocks(B11, B21), _blocks(B12, B22), _blocks(B22, B11)]),
        "sim": LONG_SIM,
        "plan": [
            {"action": "simulate", "id": "sim1", "ic": {"kind": "random", "seed": 1, "order": [1, 2]}},
            {"action": "simulate", "id": "sim2", "ic": {"kind": "random", "seed": 1, "order": [2, 1]}},
        ],
        "expectations": [
            _expect("x1 > x2 start: virus 2 extinct", "sim1.limit.label", "eq", "2-coexistence[1,3]"),
            _expect("x1 > x2 start: limit stable", "sim1.limit.abscissa", "lt", -1e-8),
            _expect("x2 > x1 start: virus 1 extinct", "sim2.limit.label", "eq", "2-coexistence[2,3]"),
            _expect("x2 > x1 start: limit stable", "sim2.limit.abscissa", "lt", -1e-8),
        ],
    }


_BUILDERS = {
    "example1": _example1,
    "example2": _example2,
    "example3": _example3,
    "example4": _example4,
    "example5": _example5,
    "example6": _example6,
    "example7": _example7,
    "example8": _example8,
    "example9": _example9,
}


def preset_names() -> list:
    return list(_BUILDERS)


def list_presets() -> list:
    """``(name, description)`` pairs."""
    return [(name, build()["description"]) for name, build in _BUILDERS.items()]


def get_preset(name: str) -> dict:
    """A fresh scenario configuration for ``name``."""
    try:
        build = _BUILDERS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(_BUILDERS)}") from None
    config = copy.deepcopy(build())
    config["name"] = name
    config.setdefault("seed", 0)
    return config
