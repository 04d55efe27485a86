"""Scenario configurations: validation, execution and report emission.

A scenario is a JSON document with either inline ``params`` or a
``family`` constructor, a run ``plan`` and optional ``expectations``.
Every action contributes named facts (``radius.1.2``, ``sim1.limit.label``,
...) and each expectation compares one fact against a value with an
explicit tolerance.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import conditions as cond
from .equilibria import certify, enumerate_equilibria, genericity_probe, newton_restricted
from .families import build_line_family, build_plane_family
from .model import TriVirusParams, jacobian
from .sim import SimConfig, classify_limit, integrate, paper_random_initial_condition
from .spectral import spectral_abscissa

log = logging.getLogger(__name__)

_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}, "minItems": 1}
_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

SCHEMA = {
    "type": "object",
    "required": ["plan"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "params": {
            "type": "object",
            "required": ["beta"],
            "additionalProperties": False,
            "properties": {
                "beta": {"type": "array", "items": _MATRIX, "minItems": 1},
                "delta": {"type": "array", "items": _VECTOR},
            },
        },
        "family": {
            "type": "object",
            "required": ["type"],
            "properties": {
                "type": {"enum": ["line", "plane"]},
                "mode": {"enum": ["identical", "general"]},
                "B": _MATRIX,
                "B1": _MATRIX,
                "M": _MATRIX,
                "M_hat": _MATRIX,
                "B3": _MATRIX,
                "delta": _VECTOR,
            },
            "additionalProperties": False,
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                name: {"type": "number", "exclusiveMinimum": 0}
                for name in ("rtol", "atol", "horizon", "window", "conv_tol", "sample_dt", "max_step", "stiffness_cap")
            },
        },
        "plan": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["action"],
                "properties": {
                    "action": {"enum": ["simulate", "enumerate", "check", "family", "genericity"]},
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_-]+$"},
                    "ic": {
                        "type": "object",
                        "properties": {
                            "kind": {"enum": ["random", "state"]},
                            "seed": {"type": "integer", "minimum": 0},
                            "order": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2, "maxItems": 2},
                            "state": {"type": "array", "items": _VECTOR},
                        },
                        "required": ["kind"],
                        "additionalProperties": False,
                    },
                    "starts": {"type": "integer", "minimum": 0},
                    "seed": {"type": "integer", "minimum": 0},
                    "bivirus": {"type": "boolean"},
                    "trials": {"type": "integer", "minimum": 1},
                    "scale": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
        "expectations": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "key", "op"],
                "properties": {
                    "name": {"type": "string"},
                    "key": {"type": "string"},
                    "op": {"enum": ["approx", "eq", "lt", "le", "gt", "ge", "odd"]},
                    "value": {},
                    "tol": {"type": "number", "minimum": 0},
                },
                "additionalProperties": False,
            },
        },
    },
    "oneOf": [{"required": ["params"]}, {"required": ["family"]}],
}


class ScenarioError(ValueError):
    """Configuration does not match the schema or is inconsistent."""


def _path(error: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in error.absolute_path]
    return "/".join(parts) if parts else "<root>"


def validate_config(config: dict) -> None:
    """Raise ScenarioError naming the offending field."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ScenarioError(f"config field '{_path(e)}': {e.message}")
    ids = [item.get("id") for item in config["plan"] if item["action"] == "simulate"]
    if None in ids or len(set(ids)) != len(ids):
        raise ScenarioError("config field 'plan': every simulate action needs a unique 'id'")
    fam = config.get("family")
    if fam is not None:
        if fam["type"] == "line":
            need = ["B1", "M", "B3"]
        elif "mode" not in fam:
            need = ["mode"]
        else:
            need = ["B"] if fam["mode"] == "identical" else ["B1", "M", "M_hat"]
        for key in need:
            if key not in fam:
                raise ScenarioError(f"config field 'family/{key}': required for {fam['type']} families")


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    validate_config(config)
    return config


@dataclass
class ScenarioResult:
    config: dict
    facts: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    report: Optional[cond.ConditionReport] = None
    enumeration: Any = None
    family: Any = None
    trajectories: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(line["passed"] for line in self.summary)


def _build(config: dict):
    """Parameters and optional family described by the config."""
    fam_cfg = config.get("family")
    if fam_cfg is None:
        p = config["params"]
        try:
            return TriVirusParams.from_matrices(p["beta"], p.get("delta")), None
        except ValueError as exc:
            raise ScenarioError(f"config field 'params': {exc}") from None
    delta = fam_cfg.get("delta")
    if fam_cfg["type"] == "line":
        fam = build_line_family(fam_cfg["B1"], fam_cfg["M"], fam_cfg["B3"], delta)
    else:
        inputs = {k: fam_cfg[k] for k in ("B", "B1", "M", "M_hat") if k in fam_cfg}
        fam = build_plane_family(fam_cfg["mode"], delta=delta, **inputs)
    return fam.params, fam


def initial_condition(params: TriVirusParams, ic: dict, default_seed: int) -> np.ndarray:
    """Initial state from an ``ic`` spec.

    ``random`` uses the four-share normalization seeded with the scenario
    seed plus the ``ic`` seed offset; an optional ``order``
    ``[a, b]`` swaps the shares of viruses ``a`` and ``b`` at every node
    where ``x^a < x^b``, so ``x^a >= x^b`` node by node.
    """
    if ic["kind"] == "state":
        return np.asarray(ic["state"], dtype=float)
    x = paper_random_initial_condition(params.n, seed=default_seed + ic.get("seed", 0))
    if "order" in ic:
        a, b = (k - 1 for k in ic["order"])
        swap = x[a] < x[b]
        x[a, swap], x[b, swap] = x[b, swap], x[a, swap].copy()
    return x


def _polish(params: TriVirusParams, state: np.ndarray, live_tol: float = 1e-6):
    """Newton-refine a trajectory endpoint on its apparent support."""
    live = [k for k in range(params.m) if np.max(state[k]) > live_tol]
    if not live:
        return certify(params, np.zeros_like(state))
    x = newton_restricted(params, live, state[live])
    if x is None:
        return None
    try:
        return certify(params, x)
    except ValueError:
        return None


def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _plain(u) for k, u in v.items()}
    return v


class _Runner:
    def __init__(self, config: dict, out: Optional[Path], parallel: bool):
        self.config = config
        self.out = out
        self.parallel = parallel
        self.seed = config.get("seed", 0)
        self.params, self.family = _build(config)
        self.result = ScenarioResult(config, family=self.family)
        self.sim_cfg = SimConfig(**config.get("sim", {}))
        self.facts = self.result.facts

    def run(self) -> ScenarioResult:
        plan = self.config["plan"]
        sims = [item for item in plan if item["action"] == "simulate"]
        for item in plan:
            if item["action"] != "simulate":
                getattr(self, "_do_" + item["action"])(item)
        # Trajectories are independent; classification waits for the other actions.
        if self.parallel and len(sims) > 1:
            with ThreadPoolExecutor() as pool:
                trajs = list(pool.map(self._integrate, sims))
        else:
            trajs = [self._integrate(item) for item in sims]
        for item, traj in zip(sims, trajs):
            self._classify(item["id"], traj)
        self._family_spread()
        self._evaluate()
        return self.result

    def _do_family(self, item):
        fam = self.family
        if fam is None:
            raise ScenarioError("config field 'plan': 'family' action needs a 'family' section")
        self.facts["family.kind"] = fam.kind
        anchor = fam.z if fam.kind == "line" else fam.anchor
        for i, v in enumerate(anchor):
            self.facts[f"family.anchor.{i + 1}"] = float(v)
        if fam.kind == "line":
            self.facts["family.radius"] = fam.radius
            self.facts["family.abscissa"] = fam.abscissa
            self.facts["family.attractivity"] = fam.attractivity
        else:
            self.facts["family.mode"] = fam.mode
        self._write("family.json", {"kind": fam.kind, "anchor": anchor, "params": self.params.to_dict(),
                                    **({"radius": fam.radius, "abscissa": fam.abscissa, "attractivity": fam.attractivity}
                                       if fam.kind == "line" else {"mode": fam.mode})})

    def _do_check(self, item):
        report = cond.check_all(self.params)
        self.result.report = report
        self._check_facts(report)

    def _check_facts(self, report):
        for c in report.checks:
            if c.name.startswith("boundary_stability_"):
                k = int(c.name.rsplit("_", 1)[1])
                self.facts[f"boundary.{k}.verdict"] = c.verdict
                for j, r in cond.invasion_radii(self.params, k - 1).items():
                    self.facts[f"radius.{k}.{j + 1}"] = r
            elif c.name == "dfe_stability":
                self.facts["dfe.verdict"] = c.verdict
            elif c.name == "sign_consistency":
                self.facts["monotone"] = c.holds
            elif c.name == "saturated_existence":
                self.facts["saturated_existence.holds"] = c.holds
                self.facts["saturated_existence.verdict"] = c.verdict
                self.facts["saturated_existence.boundary_radii_above_one"] = c.witnesses.get("corollary_boundary_radii_above_one")
                self.facts["saturated_existence.unsaturated_2coexistence"] = c.witnesses.get("corollary_2coexistence_unsaturated")
            else:
                self.facts[f"{c.name}.holds"] = c.holds
                if c.permutation is not None:
                    self.facts[f"{c.name}.permutation"] = [p + 1 for p in c.permutation]
        self._write("report.json", json.loads(report.to_json()))

    def _do_enumerate(self, item):
        res = enumerate_equilibria(
            self.params,
            starts=item.get("starts", 50),
            seed=item.get("seed", self.seed),
            bivirus=item.get("bivirus", False),
        )
        self.result.enumeration = res
        for kind in ("DFE", "boundary", "2-coexistence", "3-coexistence"):
            self.facts[f"count.{kind}"] = len(res.of_kind(kind))
        three = res.of_kind("3-coexistence")
        self.facts["all_3coexistence_saturated"] = all(e.is_saturated for e in three)
        self.facts["nondegenerate"] = res.nondegenerate
        self.facts["continuum_suspected"] = res.continuum_suspected
        self.facts["index_sum_saturated"] = res.index_sum_saturated
        self.facts["enumeration_complete"] = res.complete
        if res.nondegenerate and self.params.m == 3:
            report = self.result.report or cond.ConditionReport()
            report.add(cond.check_saturated_existence(self.params, res))
            self.result.report = report
            self._check_facts(report)
        self._write("enumeration.json", enumeration_document(res))

    def _do_genericity(self, item):
        rep = genericity_probe(
            self.params,
            trials=item.get("trials", 100),
            scale=item.get("scale", 0.05),
            seed=item.get("seed", self.seed),
            starts=item.get("starts", 20),
        )
        self.facts["genericity.degenerate_fraction"] = rep.degenerate_fraction
        self.facts["genericity.continuum_fraction"] = rep.continuum_fraction
        self.facts["genericity.distinct_counts"] = sorted(set(rep.counts))
        self._write("genericity.json", {"trials": rep.trials, "degenerate_fraction": rep.degenerate_fraction,
                                        "continuum_fraction": rep.continuum_fraction, "counts": rep.counts,
                                        "kinds": rep.kinds})

    def _integrate(self, item):
        x0 = initial_condition(self.params, item.get("ic", {"kind": "random"}), self.seed)
        traj = integrate(self.params, x0, self.sim_cfg)
        if self.out is not None:
            traj.to_csv(self.out / f"{item['id']}.csv")
        return traj

    def _classify(self, sid: str, traj):
        self.result.trajectories[sid] = traj
        f = self.facts
        f[f"{sid}.termination"] = traj.termination
        f[f"{sid}.final_time"] = float(traj.times[-1])
        f[f"{sid}.derivative_norm"] = traj.derivative_norm
        families = [self.family] if self.family is not None else []
        if families:
            d, coords = self.family.project(traj.final)
            f[f"{sid}.family_distance"] = d
            if self.family.kind == "line":
                f[f"{sid}.beta1"] = coords
            else:
                f[f"{sid}.alpha"] = [float(a) for a in coords]
                f[f"{sid}.alpha_sum"] = float(np.sum(coords))
        if not traj.converged:
            f[f"{sid}.limit.kind"] = "none"
            f[f"{sid}.limit.label"] = traj.termination
            return
        candidates = list(self.result.enumeration.equilibria) if self.result.enumeration else []
        polished = _polish(self.params, traj.final)
        if polished is not None:
            candidates.append(polished)
        eq_only = classify_limit(traj, candidates, ())
        fam_hit = families and f[f"{sid}.family_distance"] <= 1e-4
        if fam_hit:
            f[f"{sid}.limit.kind"] = self.family.kind
            f[f"{sid}.limit.label"] = self.family.kind
            f[f"{sid}.limit.distance"] = f[f"{sid}.family_distance"]
            f[f"{sid}.limit.abscissa"] = spectral_abscissa(jacobian(self.params, traj.final))
            classify_limit(traj, (), families)
            return
        f[f"{sid}.limit.kind"] = eq_only.label if eq_only.kind == "equilibrium" else "novel"
        f[f"{sid}.limit.distance"] = eq_only.distance
        if eq_only.kind == "equilibrium":
            eq = eq_only.target
            f[f"{sid}.limit.label"] = eq.describe()
            f[f"{sid}.limit.abscissa"] = eq.abscissa
            f[f"{sid}.limit.stable"] = eq.is_stable
            for k in range(self.params.m):
                f[f"{sid}.limit.block_max.{k + 1}"] = float(np.max(eq.state[k]))
        else:
            f[f"{sid}.limit.label"] = "novel"

    def _family_spread(self):
        if self.family is None or self.family.kind != "plane":
            return
        alphas = [np.array(v) for k, v in self.facts.items() if k.endswith(".alpha")]
        if len(alphas) >= 2:
            spread = max(float(np.max(np.abs(a - b))) for i, a in enumerate(alphas) for b in alphas[i + 1:])
            self.facts["family.alpha_spread"] = spread

    def _evaluate(self):
        for e in self.config.get("expectations", []):
            self.result.summary.append(evaluate_expectation(e, self.facts))
        doc = {
            "name": self.config.get("name", ""),
            "passed": self.result.passed,
            "expectations": self.result.summary,
            "facts": _plain(self.facts),
        }
        self._write("summary.json", doc)

    def _write(self, name: str, doc):
        if self.out is None:
            return
        with open(self.out / name, "w") as fh:
            json.dump(_plain(doc), fh, indent=2, sort_keys=False)
            fh.write("\n")


def evaluate_expectation(e: dict, facts: dict) -> dict:
    """One summary line: expected, actual, tolerance and verdict."""
    key, op = e["key"], e["op"]
    expected = e.get("value")
    tol = e.get("tol", 0.0)
    line = {"name": e["name"], "key": key, "op": op, "expected": expected, "tolerance": tol}
    if key not in facts:
        line.update(actual=None, passed=False, note="fact not produced by the run plan")
        return line
    actual = _plain(facts[key])
    if op == "approx":
        passed = abs(actual - expected) <= tol
    elif op == "eq":
        passed = actual == expected
    elif op == "lt":
        passed, line["tolerance"] = actual < expected, expected
    elif op == "le":
        passed, line["tolerance"] = actual <= expected, expected
    elif op == "gt":
        passed, line["tolerance"] = actual > expected, expected
    elif op == "ge":
        passed, line["tolerance"] = actual >= expected, expected
    elif op == "odd":
        passed = isinstance(actual, int) and actual % 2 == 1
    else:  # pragma: no cover - schema forbids other ops
        raise ScenarioError(f"unknown expectation op {op!r}")
    line.update(actual=actual, passed=bool(passed))
    return line


def enumeration_document(res) -> dict:
    return {
        "starts_used": res.starts_used,
        "nondegenerate": res.nondegenerate,
        "complete": res.complete,
        "index_sum_saturated": res.index_sum_saturated,
        "continuum_suspected": res.continuum_suspected,
        "continua": [{"support": list(s), "samples": [r.tolist() for r in roots]} for s, roots in res.continua.items()],
        "equilibria": [
            {
                "kind": e.kind,
                "label": e.describe(),
                "support": list(e.support),
                "state": e.state.tolist(),
                "residual": e.residual,
                "stable": e.is_stable,
                "saturated": e.is_saturated,
                "index": e.index,
                "degenerate": e.degenerate,
                "abscissa": e.abscissa,
                "zero_block_abscissas": {str(k + 1): v for k, v in e.zero_block_abscissas.items()},
            }
            for e in res.equilibria
        ],
    }


def default_output_dir() -> Path:
    return Path(os.environ.get("TRIVIRUS_OUT", "trivirus-out"))


def run_scenario(config: dict, out=None, parallel: bool = False, seed: Optional[int] = None) -> ScenarioResult:
    """Validate and execute a scenario; ``out=None`` keeps everything in memory."""
    config = json.loads(json.dumps(config))
    if seed is not None:
        config["seed"] = seed
    validate_config(config)
    out_path = None
    if out is not None:
        out_path = Path(out)
        out_path.mkdir(parents=True, exist_ok=True)
    runner = _Runner(config, out_path, parallel)
    if out_path is not None:
        runner._write("scenario.json", {"config": config, "resolved_params": runner.params.to_dict()})
    log.info("running scenario %s (%d plan items)", config.get("name", "<unnamed>"), len(config["plan"]))
    return runner.run()
