"""Mechanical checks of the stability, nonexistence and existence results.

Each check returns a :class:`CheckResult` carrying the numbers that decide
its verdict, so a report can be audited without rerunning anything.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .equilibria import EnumerationResult, PreconditionError, single_virus_equilibrium
from .model import TriVirusParams, jacobian
from .spectral import CRITICAL_TOL, is_greater, sign_verdict, spectral_abscissa, spectral_radius

STABLE = "stable"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"
NOT_APPLICABLE = "not applicable"


@dataclass
class CheckResult:
    name: str
    holds: Optional[bool]  # hypothesis verdict; None when not applicable
    verdict: str
    witnesses: dict = field(default_factory=dict)
    conclusions: list = field(default_factory=list)
    equilibrium: Optional[str] = None
    permutation: Optional[tuple] = None

    def to_dict(self) -> dict:
        d = {
            "check": self.name,
            "hypothesis_holds": self.holds,
            "verdict": self.verdict,
            "witnesses": {k: _plain(v) for k, v in self.witnesses.items()},
            "conclusions": list(self.conclusions),
        }
        if self.equilibrium is not None:
            d["equilibrium"] = self.equilibrium
        if self.permutation is not None:
            d["permutation"] = [p + 1 for p in self.permutation]
        return d


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    return v


@dataclass
class ConditionReport:
    checks: list = field(default_factory=list)

    def add(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        return result

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        """One record per check."""
        return json.dumps({"checks": [c.to_dict() for c in self.checks]}, indent=2)


def _require_three(params: TriVirusParams):
    if params.m != 3:
        raise ValueError(f"theorem checks are stated for three viruses, got {params.m}")


def _label(k: int, m: int = 3) -> str:
    parts = ["0"] * m
    parts[k] = f"x~{k + 1}"
    return "(" + ", ".join(parts) + ")"


def check_dfe_stability(params: TriVirusParams) -> CheckResult:
    """Classify the disease-free equilibrium from ``s(-D^k + B^k)``."""
    abscissas = [spectral_abscissa(params.beta[k] - params.D(k)) for k in range(params.m)]
    witnesses = {f"s(-D{k + 1}+B{k + 1})": s for k, s in enumerate(abscissas)}
    if all(s < -CRITICAL_TOL for s in abscissas):
        verdict, concl = "GES", ["DFE globally exponentially stable on the domain"]
    elif all(s <= CRITICAL_TOL for s in abscissas):
        verdict, concl = "unique-DFE", ["DFE is the unique equilibrium", "DFE asymptotically stable"]
    elif any(s > CRITICAL_TOL for s in abscissas):
        verdict, concl = "DFE unstable", ["DFE unstable"]
    else:
        verdict, concl = INCONCLUSIVE, []
    return CheckResult("dfe_stability", verdict != INCONCLUSIVE, verdict, witnesses, concl, "DFE")


def invasion_radii(params: TriVirusParams, k: int, xk: Optional[np.ndarray] = None) -> dict:
    """``rho((I - X~k)(D^j)^{-1} B^j)`` for every ``j != k``."""
    if xk is None:
        xk = single_virus_equilibrium(params.delta[k], params.beta[k])
        if xk is None:
            raise PreconditionError(f"virus {k + 1} has no endemic equilibrium")
    return {
        j: spectral_radius((1.0 - xk)[:, None] * params.scaled_beta(j))
        for j in range(params.m)
        if j != k
    }


def check_boundary_stability(params: TriVirusParams, k: int) -> CheckResult:
    """Local stability of the single-virus equilibrium of virus ``k``.

    Stable iff every other virus has invasion radius below one.
    """
    _require_three(params)
    if spectral_abscissa(params.beta[k] - params.D(k)) <= 0:
        raise PreconditionError(f"virus {k + 1} is below threshold; no boundary equilibrium")
    radii = invasion_radii(params, k)
    signs = [sign_verdict(r, 1.0) for r in radii.values()]
    if any(s > 0 for s in signs):
        verdict = UNSTABLE
    elif all(s < 0 for s in signs):
        verdict = STABLE
    else:
        verdict = INCONCLUSIVE
    witnesses = {f"rho((I-X~{k + 1})(D{j + 1})^-1 B{j + 1})": r for j, r in radii.items()}
    concl = [] if verdict == INCONCLUSIVE else [f"{_label(k)} {'locally exponentially stable' if verdict == STABLE else 'unstable'}"]
    return CheckResult(f"boundary_stability_{k + 1}", verdict != INCONCLUSIVE, verdict, witnesses, concl, _label(k))


def _thresholds(params) -> dict:
    return {f"rho((D{k + 1})^-1 B{k + 1})": spectral_radius(params.scaled_beta(k)) for k in range(params.m)}


def _ordering_matrix(params) -> dict:
    """Pairwise ``>`` relations between scaled infection matrices."""
    M = [params.scaled_beta(k) for k in range(params.m)]
    return {(a, b): is_greater(M[a], M[b]) for a in range(params.m) for b in range(params.m) if a != b}


def check_nonexistence_3coexistence(params: TriVirusParams, relabel: bool = True) -> CheckResult:
    """Strict chain ``M_c > M_b > M_a`` of scaled infection matrices.

    With every virus above threshold and irreducible, the chain rules out
    any 3-coexistence equilibrium, makes the DFE and the boundary equilibria
    of ``a`` and ``b`` unstable, and the boundary equilibrium of ``c``
    locally exponentially stable. ``relabel`` searches all orderings.
    """
    _require_three(params)
    if not params.all_irreducible():
        raise PreconditionError("all infection matrices must be irreducible")
    rho = _thresholds(params)
    above = all(r > 1.0 for r in rho.values())
    greater = _ordering_matrix(params)
    candidates = list(itertools.permutations(range(3))) if relabel else [(0, 1, 2)]
    witnesses = dict(rho)
    for a, b in greater:
        witnesses[f"M{a + 1} > M{b + 1}"] = greater[(a, b)]
    for perm in candidates:
        weak, mid, strong = perm
        if greater[(strong, mid)] and greater[(mid, weak)] and above:
            concl = [
                "DFE unstable",
                f"{_label(weak)} unstable",
                f"{_label(mid)} unstable",
                f"{_label(strong)} locally exponentially stable",
                "no 3-coexistence equilibrium",
                f"no 2-coexistence equilibrium of the forms with virus {weak + 1} alive",
            ]
            return CheckResult("nonexistence_3coexistence", True, "hypothesis holds", witnesses, concl, permutation=perm)
    return CheckResult("nonexistence_3coexistence", False, "hypothesis fails", witnesses, [])


def check_nonexistence_2coexistence(params: TriVirusParams, relabel: bool = True) -> CheckResult:
    """Virus ``w`` dominated by both others: ``M_j > M_w`` for both ``j != w``.

    Excludes 2-coexistence equilibria in which ``w`` survives together with
    one other virus; says nothing about the pair that excludes ``w``.
    """
    _require_three(params)
    if not params.all_irreducible():
        raise PreconditionError("all infection matrices must be irreducible")
    rho = _thresholds(params)
    above = all(r > 1.0 for r in rho.values())
    greater = _ordering_matrix(params)
    witnesses = dict(rho)
    for a, b in greater:
        witnesses[f"M{a + 1} > M{b + 1}"] = greater[(a, b)]
    candidates = range(3) if relabel else [0]
    for w in candidates:
        others = [j for j in range(3) if j != w]
        if above and all(greater[(j, w)] for j in others):
            excluded = []
            for j in others:
                forms = ["0", "0", "0"]
                forms[w] = f"x{w + 1}"
                forms[j] = f"x{j + 1}"
                excluded.append("(" + ", ".join(forms) + ")")
            concl = ["DFE unstable", f"{_label(w)} unstable"] + [f"no 2-coexistence equilibrium of the form {f}" for f in excluded]
            perm = (w, others[0], others[1])
            res = CheckResult("nonexistence_2coexistence", True, "hypothesis holds", witnesses, concl, permutation=perm)
            res.witnesses["excluded_forms"] = excluded
            return res
    return CheckResult("nonexistence_2coexistence", False, "hypothesis fails", witnesses, [])


def check_saturated_existence(params: TriVirusParams, enumeration: EnumerationResult) -> CheckResult:
    """Existence of a saturated equilibrium and the odd-count corollary.

    Needs a converged, nondegenerate enumeration. Always asserts that a
    stable boundary equilibrium, a saturated 2-coexistence equilibrium or a
    3-coexistence equilibrium was found. When all boundary equilibria are
    invadable and every 2-coexistence equilibrium is unsaturated, also
    asserts an odd number of 3-coexistence equilibria.
    """
    _require_three(params)
    rho = _thresholds(params)
    if not all(r > 1.0 for r in rho.values()):
        return CheckResult("saturated_existence", None, NOT_APPLICABLE, rho, ["some virus is below threshold"])
    if not enumeration.nondegenerate:
        raise PreconditionError("enumeration is degenerate; index theory does not apply")
    witnesses = dict(rho)
    boundary = enumeration.of_kind("boundary")
    two = enumeration.of_kind("2-coexistence")
    three = enumeration.of_kind("3-coexistence")
    stable_boundary = [e for e in boundary if e.is_stable]
    saturated_two = [e for e in two if e.is_saturated]
    trichotomy = bool(stable_boundary or saturated_two or three)
    witnesses["stable_boundary"] = [e.describe() for e in stable_boundary]
    witnesses["saturated_2coexistence"] = [e.describe() for e in saturated_two]
    witnesses["count_3coexistence"] = len(three)
    witnesses["index_sum_saturated"] = enumeration.index_sum_saturated

    radii_ok = True
    for k in range(3):
        for j, r in invasion_radii(params, k).items():
            witnesses[f"rho((I-X~{k + 1})(D{j + 1})^-1 B{j + 1})"] = r
            radii_ok &= r > 1.0 + CRITICAL_TOL
    unsat_ok = True
    for e in two:
        (dead,) = [k for k in range(3) if not e.support[k]]
        s = e.zero_block_abscissas[dead]
        witnesses[f"s(-D{dead + 1}+(I-sum X)B{dead + 1}) at {e.describe()}"] = s
        unsat_ok &= s >= -CRITICAL_TOL
    corollary = radii_ok and unsat_ok and len(two) > 0
    witnesses["corollary_boundary_radii_above_one"] = radii_ok
    witnesses["corollary_2coexistence_unsaturated"] = unsat_ok
    concl = ["trichotomy satisfied" if trichotomy else "trichotomy VIOLATED"]
    ok = trichotomy
    if corollary:
        odd = len(three) % 2 == 1
        concl.append("odd number of 3-coexistence equilibria" if odd else "3-coexistence count is NOT odd")
        ok &= odd and all(e.is_saturated for e in three)
    verdict = "consistent" if ok else "inconsistent"
    return CheckResult("saturated_existence", corollary, verdict, witnesses, concl)


@dataclass
class SignedGraph:
    n_vertices: int
    edges: list  # (source, target, sign) with sign in {+1, -1}

    def __post_init__(self):
        for s, t, sign in self.edges:
            if s == t:
                raise ValueError("signed graph may not contain self-loops")
            if sign not in (1, -1):
                raise ValueError(f"edge sign must be +1 or -1, got {sign!r}")


def sign_probe_state(params: TriVirusParams) -> np.ndarray:
    """Canonical strictly interior state, ``1 / (2m)`` everywhere."""
    return np.full((params.m, params.n), 1.0 / (2 * params.m))


def jacobian_sign_graph(params: TriVirusParams, state=None) -> SignedGraph:
    """Signed digraph of the off-diagonal Jacobian sign pattern.

    Edge ``j -> i`` carries the sign of ``J[i, j]``; zero entries give no
    edge. The pattern is constant on the interior of the domain.
    """
    x = sign_probe_state(params) if state is None else state
    J = jacobian(params, x)
    N = J.shape[0]
    edges = [
        (j, i, 1 if J[i, j] > 0 else -1)
        for i in range(N)
        for j in range(N)
        if i != j and J[i, j] != 0
    ]
    return SignedGraph(N, edges)


def is_sign_consistent(g: SignedGraph) -> bool:
    """True iff every undirected cycle has an even number of negative edges.

    Equivalent to a vertex labelling ``s`` in ``{+1, -1}`` with
    ``sign(u, v) == s[u] * s[v]`` for every edge; found by BFS.
    """
    adj = [[] for _ in range(g.n_vertices)]
    for u, v, sign in g.edges:
        adj[u].append((v, sign))
        adj[v].append((u, sign))
    label = [0] * g.n_vertices
    for root in range(g.n_vertices):
        if label[root]:
            continue
        label[root] = 1
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v, sign in adj[u]:
                want = label[u] * sign
                if label[v] == 0:
                    label[v] = want
                    queue.append(v)
                elif label[v] != want:
                    return False
    return True


def check_monotonicity(params: TriVirusParams) -> CheckResult:
    g = jacobian_sign_graph(params)
    consistent = is_sign_consistent(g)
    negative = sum(1 for e in g.edges if e[2] < 0)
    return CheckResult(
        "sign_consistency",
        consistent,
        "monotone (sign-consistent)" if consistent else "not monotone (sign-inconsistent)",
        {"edges": len(g.edges), "negative_edges": negative},
        [],
    )


def check_all(params: TriVirusParams, enumeration: Optional[EnumerationResult] = None) -> ConditionReport:
    """Run every applicable check and collect the results."""
    _require_three(params)
    report = ConditionReport()
    report.add(check_dfe_stability(params))
    irreducible = params.all_irreducible()
    for k in range(3):
        if irreducible and spectral_abscissa(params.beta[k] - params.D(k)) > 0:
            report.add(check_boundary_stability(params, k))
    if irreducible:
        report.add(check_nonexistence_3coexistence(params))
        report.add(check_nonexistence_2coexistence(params))
    if enumeration is not None and enumeration.nondegenerate:
        report.add(check_saturated_existence(params, enumeration))
    report.add(check_monotonicity(params))
    return report
