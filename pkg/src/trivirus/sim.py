"""Trajectory integration with domain guards and convergence detection.

The integrator is a Dormand-Prince 5(4) pair with a PI step-size
controller and the standard quartic dense output. Blocks of viruses that
start exactly at zero are removed from the integration so the extinct
subspace is preserved exactly.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .model import DOMAIN_TOL, DomainError, TriVirusParams, as_blocks, rhs, validate_state

log = logging.getLogger(__name__)

CONVERGED = "converged"
HORIZON = "horizon_reached"
GUARD = "guard_tripped"

# Dormand-Prince 5(4) tableau.
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# Fifth-order minus embedded fourth-order weights (7th stage is FSAL).
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Dense-output polynomial coefficients (Shampine's choice of c6).
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@dataclass
class SimConfig:
    rtol: float = 1e-8
    atol: float = 1e-10
    horizon: float = 2000.0
    window: float = 10.0  # time units the derivative must stay below conv_tol
    conv_tol: float = 1e-10
    sample_dt: Optional[float] = 1.0  # None records every accepted step
    max_step: float = 50.0
    guard_tol: float = DOMAIN_TOL
    # Upper bound on |h * lambda| for the stiffest mode, kept inside the
    # real stability interval (about 3.3) so stiff components are damped
    # near equilibria instead of jittering at the tolerance level.
    stiffness_cap: float = 2.0

    def __post_init__(self):
        for name in ("rtol", "atol", "horizon", "window", "conv_tol", "max_step", "stiffness_cap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"SimConfig.{name} must be positive")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise ValueError("SimConfig.sample_dt must be positive or None")


@dataclass
class Trajectory:
    times: np.ndarray  # (T,)
    states: np.ndarray  # (T, m, n)
    termination: str
    derivative_norm: float  # ||f||_inf at the final state
    n_steps: int = 0
    n_rejected: int = 0
    limit: Optional[Any] = None  # LimitClassification once classified

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED

    def to_csv(self, path) -> None:
        """Write ``t,x1_1..x1_n,x2_1..`` rows with 17 significant digits."""
        _, m, n = self.states.shape
        header = ["t"] + [f"x{k + 1}_{i + 1}" for k in range(m) for i in range(n)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, x in zip(self.times, self.states):
                w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x.ravel()])


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :meth:`Trajectory.to_csv`: returns ``(times, states)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    m = len({h.split("_")[0] for h in header[1:]})
    n = (len(header) - 1) // m
    return body[:, 0], body[:, 1:].reshape(-1, m, n)


def _project(y: np.ndarray, tol: float) -> Optional[np.ndarray]:
    """Clamp a reduced state onto the domain if it is within ``tol``, else None."""
    if np.any(y < -tol) or np.any(y.sum(axis=0) > 1.0 + tol):
        return None
    y = np.maximum(y, 0.0)
    total = y.sum(axis=0)
    over = total > 1.0
    if np.any(over):
        y[:, over] /= total[over]
    return y


def integrate(params: TriVirusParams, x0, cfg: Optional[SimConfig] = None) -> Trajectory:
    """Integrate from ``x0`` until convergence, the horizon, or a guard trip.

    Steps that would leave the domain by more than ``cfg.guard_tol`` are
    rejected and retried with a smaller step; the guard trips only when the
    step size collapses, which signals integrator failure since the domain
    is forward invariant.
    """
    cfg = cfg or SimConfig()
    m, n = params.m, params.n
    x0 = as_blocks(x0, m, n).copy()
    violations = validate_state(x0, cfg.guard_tol)
    if violations:
        raise DomainError(violations)
    x0 = _project(x0, cfg.guard_tol)

    live = [k for k in range(m) if np.any(x0[k] > 0)]
    if not live:
        return Trajectory(np.array([0.0]), x0[None].copy(), CONVERGED, 0.0)
    sub = params if len(live) == m else params.subsystem(live)

    def f(y):
        return rhs(sub, y)

    def expand(y):
        full = np.zeros((m, n))
        full[live] = y
        return full

    y = x0[live]
    t = 0.0
    fy = f(y)
    times, states = [0.0], [expand(y)]
    sample_idx = 1
    next_sample = cfg.sample_dt if cfg.sample_dt else None

    # Initial step from the usual two-norm heuristic.
    scale = cfg.atol + cfg.rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((fy / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, cfg.max_step)

    k_stages = np.empty((7,) + y.shape)
    err_prev = 1e-4
    below_since = 0.0 if np.max(np.abs(fy)) < cfg.conv_tol else None
    n_steps = n_rejected = 0
    termination = HORIZON
    h_min = 1e-14

    while t < cfg.horizon:
        h = min(h, cfg.horizon - t)
        k_stages[0] = fy
        for s in range(1, 6):
            dy = sum(a * k_stages[j] for j, a in enumerate(_A[s]) if a != 0.0)
            y_stage = y + h * dy
            k_stages[s] = f(y_stage)
        y_new = y + h * np.tensordot(_B, k_stages[:6], axes=1)
        k_stages[6] = f(y_new)
        # Stiffness estimate from the last two stages (same abscissa t + h).
        dist = np.linalg.norm(y_new - y_stage)
        h_stable = np.inf
        if dist > 0:
            lam = np.linalg.norm(k_stages[6] - k_stages[5]) / dist
            if lam > 0:
                h_stable = cfg.stiffness_cap / lam
        err_vec = h * np.tensordot(_E, k_stages, axes=1)
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.sqrt(np.mean((err_vec / scale) ** 2))

        projected = _project(y_new.copy(), cfg.guard_tol) if err <= 1.0 else None
        if projected is None:
            n_rejected += 1
            if err <= 1.0:
                # Accurate but infeasible: shrink and retry.
                h *= 0.5
            else:
                h *= max(0.2, 0.9 * err ** -0.2)
            if h < h_min * max(1.0, t):
                termination = GUARD
                log.warning("domain guard tripped at t=%g", t)
                break
            continue

        # Accepted step; record dense samples inside (t, t + h].
        if next_sample is not None and next_sample <= t + h:
            Q = np.tensordot(k_stages, _P, axes=([0], [0]))
            while next_sample <= t + h:
                powers = np.cumprod(np.full(4, (next_sample - t) / h))
                ys = _project(y + h * (Q @ powers), cfg.guard_tol)
                if ys is not None:
                    times.append(next_sample)
                    states.append(expand(ys))
                sample_idx += 1
                next_sample = sample_idx * cfg.sample_dt
        t += h
        fy = k_stages[6].copy() if np.array_equal(projected, y_new) else f(projected)
        y = projected
        n_steps += 1
        if next_sample is None:
            times.append(t)
            states.append(expand(y))

        fnorm = np.max(np.abs(fy))
        if fnorm < cfg.conv_tol:
            if below_since is None:
                below_since = t
            elif t - below_since >= cfg.window:
                termination = CONVERGED
                break
        else:
            below_since = None

        # PI controller (Gustafsson) on the fourth-order error estimate.
        err = max(err, 1e-10)
        factor = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5)
        h = min(h * min(5.0, max(0.2, factor)), cfg.max_step, max(h_stable, h * 0.5))
        err_prev = err

    if times[-1] < t:
        times.append(t)
        states.append(expand(y))
    return Trajectory(
        np.array(times),
        np.array(states),
        termination,
        float(np.max(np.abs(fy))),
        n_steps,
        n_rejected,
    )


def paper_random_initial_condition(n: int, seed=None, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Random interior state: four uniform shares per node, normalized.

    The three virus fractions of node ``i`` are ``p_i^k / sum_s p_i^s`` for
    ``k = 1..3``; the fourth share is the susceptible remainder.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = rng if rng is not None else np.random.default_rng(seed)
    p = rng.uniform(size=(n, 4))
    while np.any(p == 0.0):
        p[p == 0.0] = rng.uniform(size=int(np.sum(p == 0.0)))
    p /= p.sum(axis=1, keepdims=True)
    return np.ascontiguousarray(p[:, :3].T)


def integrate_many(params_list, x0_list, cfg=None, parallel: bool = False, max_workers=None):
    """Integrate independent trajectories; results keep input order."""
    jobs = list(zip(params_list, x0_list))
    if not parallel:
        return [integrate(p, x0, cfg) for p, x0 in jobs]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda job: integrate(job[0], job[1], cfg), jobs))


@dataclass
class LimitClassification:
    kind: str  # "equilibrium", "family" or "novel"
    distance: float
    target: Any = None
    coordinates: Optional[np.ndarray] = None  # beta1 for lines, alpha for planes
    label: str = ""


def classify_limit(
    traj: Trajectory,
    equilibria: Sequence = (),
    families: Sequence = (),
    tol: float = 1e-4,
) -> LimitClassification:
    """Nearest known equilibrium or equilibrium family to the final state.

    ``equilibria`` holds objects with a ``state`` attribute (or raw
    states); ``families`` holds objects with a ``project(state)`` method
    returning ``(distance, coordinates)``.
    """
    if traj.termination != CONVERGED:
        raise ValueError(f"trajectory did not converge ({traj.termination})")
    x = traj.final
    best = LimitClassification("novel", np.inf)
    for eq in equilibria:
        state = getattr(eq, "state", eq)
        d = float(np.max(np.abs(np.asarray(state) - x)))
        if d < best.distance:
            best = LimitClassification("equilibrium", d, eq, label=getattr(eq, "kind", ""))
    for fam in families:
        d, coords = fam.project(x)
        if d < best.distance:
            best = LimitClassification("family", d, fam, coords, label=getattr(fam, "kind", ""))
    if best.distance > tol:
        best = LimitClassification("novel", best.distance, label="novel limit")
    traj.limit = best
    return best
