"""Equilibrium computation, enumeration and certification.

Every equilibrium has, per virus, either an identically zero block or a
strictly positive one, so enumeration runs one restricted Newton solve per
support pattern, with dead viruses pinned at zero.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import TriVirusParams, as_blocks, jacobian, rhs
from .spectral import CRITICAL_TOL, is_irreducible, spectral_abscissa, spectral_radius, perron_vectors

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100
DEDUP_TOL = 1e-6
CONTINUUM_TOL = 1e-9
DEGENERACY_TOL = 1e-10
POSITIVITY_TOL = 1e-8


class PreconditionError(ValueError):
    pass


def single_virus_equilibrium(delta, beta, tol: float = NEWTON_TOL) -> Optional[np.ndarray]:
    """Unique endemic equilibrium of one SIS virus, or None below threshold.

    Solves ``(-D + (I - X) B) x = 0`` with ``0 << x << 1``. Exists iff
    ``rho(D^{-1} B) > 1``.
    """
    delta = np.asarray(delta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if not is_irreducible(beta):
        raise PreconditionError("infection matrix is reducible; the endemic equilibrium need not be unique")
    M = beta / delta[:, None]
    rho = spectral_radius(M)
    if rho <= 1.0:
        return None
    _, v, _ = perron_vectors(M)
    x = np.abs(v) / np.max(np.abs(v)) * (1.0 - 1.0 / rho)
    for _ in range(10_000):
        Bx = beta @ x
        x_new = Bx / (delta + Bx)
        if np.max(np.abs(x_new - x)) < 1e-10:
            x = x_new
            break
        x = x_new
    for _ in range(50):
        Bx = beta @ x
        F = (1.0 - x) * Bx - delta * x
        if np.max(np.abs(F)) < tol:
            break
        J = (1.0 - x)[:, None] * beta - np.diag(delta + Bx)
        x = x - np.linalg.solve(J, F)
    F = (1.0 - x) * (beta @ x) - delta * x
    if np.max(np.abs(F)) >= tol or not (np.all(x > 0) and np.all(x < 1)):
        raise RuntimeError(f"single-virus solve failed (residual {np.max(np.abs(F)):.3g})")
    return x


@dataclass
class Equilibrium:
    state: np.ndarray  # (m, n)
    support: tuple[bool, ...]
    spectrum: np.ndarray
    is_stable: bool
    is_saturated: bool
    index: Optional[int]  # None when the Jacobian is degenerate
    residual: float
    degenerate: bool = False
    # Spectral abscissa of each extinct virus's diagonal block.
    zero_block_abscissas: dict = field(default_factory=dict)

    @property
    def alive(self) -> tuple[int, ...]:
        return tuple(k for k, s in enumerate(self.support) if s)

    @property
    def kind(self) -> str:
        live = len(self.alive)
        if live == 0:
            return "DFE"
        if live == 1:
            return "boundary"
        return f"{live}-coexistence"

    @property
    def abscissa(self) -> float:
        return float(np.max(self.spectrum.real))

    def describe(self) -> str:
        names = ",".join(str(k + 1) for k in self.alive) or "-"
        return f"{self.kind}[{names}]"


def certify(params: TriVirusParams, state, residual_tol: float = RESIDUAL_TOL) -> Equilibrium:
    """Stability, saturation and index of a computed root.

    Saturated means every extinct virus's diagonal Jacobian block is
    Hurwitz; the index is the sign of ``det(-J)``.
    """
    x = as_blocks(state, params.m, params.n).copy()
    residual = float(np.max(np.abs(rhs(params, x))))
    if residual >= residual_tol:
        raise ValueError(f"not an equilibrium: residual {residual:.3g} >= {residual_tol:g}")
    support = tuple(bool(np.any(x[k] != 0)) for k in range(params.m))
    J = jacobian(params, x)
    spectrum = np.linalg.eigvals(J)
    healthy = 1.0 - x.sum(axis=0)
    zero_abs = {}
    for k, live in enumerate(support):
        if not live:
            block = healthy[:, None] * params.beta[k] - np.diag(params.delta[k])
            zero_abs[k] = spectral_abscissa(block)
    saturated = all(s < -CRITICAL_TOL for s in zero_abs.values())
    sv = np.linalg.svd(J, compute_uv=False)
    degenerate = bool(sv[-1] <= DEGENERACY_TOL * sv[0])
    index = None
    if not degenerate:
        sign, _ = np.linalg.slogdet(-J)
        index = int(sign)
    return Equilibrium(
        state=x,
        support=support,
        spectrum=spectrum,
        is_stable=bool(np.max(spectrum.real) < -CRITICAL_TOL),
        is_saturated=saturated,
        index=index,
        residual=residual,
        degenerate=degenerate,
        zero_block_abscissas=zero_abs,
    )


saturation_and_index = certify


def newton_restricted(
    params: TriVirusParams,
    live: Sequence[int],
    y0,
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> Optional[np.ndarray]:
    """Damped Newton on the live viruses with the others pinned at zero.

    Returns the full ``(m, n)`` root, or None when the iteration fails.
    Least-squares steps keep the iteration well defined on continua of
    equilibria, where the Jacobian is singular.
    """
    live = list(live)
    sub = params.subsystem(live)
    y = np.array(y0, dtype=float).reshape(len(live), params.n)
    F = rhs(sub, y)
    norm = np.linalg.norm(F)
    for _ in range(max_iter):
        if np.max(np.abs(F)) < tol:
            break
        J = jacobian(sub, y)
        try:
            step = np.linalg.solve(J, -F.ravel())
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F.ravel(), rcond=None)[0]
        step = step.reshape(y.shape)
        alpha = 1.0
        while alpha > 1e-8:
            y_try = y + alpha * step
            F_try = rhs(sub, y_try)
            norm_try = np.linalg.norm(F_try)
            if norm_try <= (1.0 - 1e-4 * alpha) * norm:
                break
            alpha *= 0.5
        else:
            return None
        y, F, norm = y_try, F_try, norm_try
        if np.max(np.abs(y)) > 1e3:
            return None
    if not np.max(np.abs(F)) < tol:
        return None
    full = np.zeros((params.m, params.n))
    full[live] = y
    return full


def _admissible(x: np.ndarray, live: Sequence[int]) -> bool:
    """Live blocks strictly inside (0, 1) and node totals strictly below 1."""
    return bool(
        np.all(x[list(live)] > POSITIVITY_TOL)
        and np.all(x.sum(axis=0) < 1.0 - POSITIVITY_TOL)
    )


def _random_seed(rng: np.random.Generator, live: Sequence[int], n: int) -> np.ndarray:
    p = rng.uniform(size=(n, len(live) + 1))
    p /= p.sum(axis=1, keepdims=True)
    return np.ascontiguousarray(p[:, : len(live)].T)


@dataclass
class EnumerationResult:
    equilibria: list
    starts_used: int
    nondegenerate: bool
    index_sum_saturated: int
    # Support patterns whose roots appear to form a continuum, with samples.
    continua: dict = field(default_factory=dict)
    # No pattern produced a new root during the second half of its random starts.
    complete: bool = False

    @property
    def continuum_suspected(self) -> bool:
        return bool(self.continua)

    def of_kind(self, kind: str) -> list:
        return [e for e in self.equilibria if e.kind == kind]

    def with_support(self, support: Sequence[bool]) -> list:
        support = tuple(bool(s) for s in support)
        return [e for e in self.equilibria if e.support == support]

    def saturated(self) -> list:
        return [e for e in self.equilibria if e.is_saturated]


class _PatternRoots:
    """Distinct roots of one support pattern, with continuum detection."""

    def __init__(self, params: TriVirusParams, live: Sequence[int]):
        self.params = params
        self.live = list(live)
        self.roots: list[np.ndarray] = []
        self.residuals: list[float] = []
        self.continuum = False

    def add(self, x: np.ndarray) -> bool:
        res = float(np.max(np.abs(rhs(self.params, x))))
        for i, r in enumerate(self.roots):
            if np.max(np.abs(r - x)) < DEDUP_TOL:
                if res < self.residuals[i]:
                    self.roots[i], self.residuals[i] = x, res
                return False
        for r in self.roots:
            mid = 0.5 * (r + x)
            if np.max(np.abs(rhs(self.params, mid))) < CONTINUUM_TOL:
                self.continuum = True
                break
        self.roots.append(x)
        self.residuals.append(res)
        return True


def _structured_seeds(params: TriVirusParams, live: Sequence[int], boundary: dict) -> list:
    seeds = []
    n = params.n
    if len(live) == 1:
        k = live[0]
        if boundary.get(k) is not None:
            seeds.append(boundary[k][None, :])
        return seeds
    tildes = [boundary[k] for k in live]
    weights = [np.full(len(live), 1.0 / len(live))]
    for j in range(len(live)):
        w = np.full(len(live), 0.1 / max(1, len(live) - 1))
        w[j] = 0.9
        weights.append(w)
    for w in weights:
        seeds.append(np.array([wk * t for wk, t in zip(w, tildes)]).reshape(len(live), n))
    return seeds


def enumerate_equilibria(
    params: TriVirusParams,
    starts: int = 50,
    seed: int = 0,
    extra_seeds: Sequence = (),
    bivirus: bool = False,
) -> EnumerationResult:
    """Best-effort enumeration of all equilibria by multi-start Newton.

    For each of the ``2^m`` support patterns the restricted system is
    solved from ``starts`` random interior seeds and from structured seeds
    (boundary equilibria, their convex mixtures, any ``extra_seeds`` full
    states, and optionally bivirus simulation limits). Patterns containing a
    sub-threshold virus are skipped, since a live virus at equilibrium
    needs ``rho(D^{-1} B) > 1``.
    """
    m, n = params.m, params.n
    for k in range(m):
        if not params.irreducible(k):
            raise PreconditionError(f"infection matrix of virus {k + 1} is reducible")
    rng = np.random.default_rng(seed)
    boundary = {k: single_virus_equilibrium(params.delta[k], params.beta[k]) for k in range(m)}
    endemic = [k for k in range(m) if boundary[k] is not None]

    extra = [as_blocks(s, m, n) for s in extra_seeds]
    if bivirus:
        for i, j in itertools.combinations(endemic, 2):
            extra.extend(_bivirus_limits(params, i, j, boundary))

    found: list[_PatternRoots] = []
    starts_used = 0
    complete = True
    dfe = _PatternRoots(params, [])
    dfe.add(np.zeros((m, n)))
    found.append(dfe)
    for size in range(1, m + 1):
        for live in itertools.combinations(range(m), size):
            if any(k not in endemic for k in live):
                continue
            pattern = _PatternRoots(params, live)
            dead = [k for k in range(m) if k not in live]
            seeds = _structured_seeds(params, live, boundary)
            for s in extra:
                if np.all(s[dead] == 0) and np.all(s[list(live)] > 0):
                    seeds.append(s[list(live)])
            for s in seeds:
                x = newton_restricted(params, live, s)
                starts_used += 1
                if x is not None and _admissible(x, live):
                    pattern.add(x)
            last_new = -1
            for trial in range(starts):
                x = newton_restricted(params, live, _random_seed(rng, live, n))
                starts_used += 1
                if x is not None and _admissible(x, live) and pattern.add(x):
                    last_new = trial
            if size > 1 and last_new >= starts // 2:
                complete = False
            found.append(pattern)

    equilibria, continua = [], {}
    for pattern in found:
        support = tuple(k in pattern.live for k in range(m))
        if pattern.continuum:
            continua[support] = [r.copy() for r in pattern.roots]
            continue
        for r in pattern.roots:
            equilibria.append(certify(params, r))
    nondegenerate = not continua and all(not e.degenerate for e in equilibria)
    index_sum = sum(e.index for e in equilibria if e.is_saturated and e.index is not None)
    return EnumerationResult(
        equilibria=equilibria,
        starts_used=starts_used,
        nondegenerate=nondegenerate,
        index_sum_saturated=index_sum,
        continua=continua,
        complete=complete and not continua,
    )


def _extreme_starts(boundary: dict, i: int, j: int, m: int, n: int, eps: float):
    a = np.zeros((m, n))
    a[i] = (1.0 - eps) * boundary[i]
    a[j] = eps
    b = np.zeros((m, n))
    b[j] = (1.0 - eps) * boundary[j]
    b[i] = eps
    return a, b


def _bivirus_limits(params, i, j, boundary, eps=1e-3, horizon=500.0):
    from .sim import SimConfig, integrate

    cfg = SimConfig(horizon=horizon, sample_dt=None)
    out = []
    for x0 in _extreme_starts(boundary, i, j, params.m, params.n, eps):
        out.append(integrate(params, x0, cfg).final)
    return out


@dataclass
class BivirusResult:
    pair: tuple[int, int]
    equilibria: list  # certified 2-coexistence equilibria of the full system
    limits: tuple  # final states of the two extreme trajectories
    continuum: bool = False
    samples: list = field(default_factory=list)  # continuum samples when flagged


def bivirus_coexistence(params: TriVirusParams, i: int, j: int, eps: float = 1e-3, cfg=None) -> BivirusResult:
    """Coexistence equilibria of viruses ``i`` and ``j`` with the rest extinct.

    The two-virus system is monotone, so trajectories from the two extreme
    starts (virus ``i`` endemic with a trace of ``j``, and vice versa)
    converge to equilibria that bracket every other equilibrium in the
    competitive order. Newton is seeded from both limits and points on the
    segment between them.
    """
    from .sim import SimConfig, integrate

    for k in (i, j):
        if not params.irreducible(k):
            raise PreconditionError(f"infection matrix of virus {k + 1} is reducible")
        if spectral_radius(params.scaled_beta(k)) <= 1.0:
            raise PreconditionError(f"virus {k + 1} is below its epidemic threshold")
    m, n = params.m, params.n
    boundary = {k: single_virus_equilibrium(params.delta[k], params.beta[k]) for k in (i, j)}
    cfg = cfg or SimConfig(horizon=50_000.0, sample_dt=None)
    limits = tuple(integrate(params, x0, cfg).final for x0 in _extreme_starts(boundary, i, j, m, n, eps))
    pattern = _PatternRoots(params, [i, j])
    for w in np.linspace(0.0, 1.0, 5):
        seed = (1 - w) * limits[0] + w * limits[1]
        seed_live = seed[[i, j]]
        if np.any(seed_live <= 0):
            # Limit on the boundary: nudge into the interior of the face.
            seed_live = np.maximum(seed_live, 1e-3)
        x = newton_restricted(params, [i, j], seed_live)
        if x is not None and _admissible(x, [i, j]):
            pattern.add(x)
    if pattern.continuum:
        return BivirusResult((i, j), [], limits, True, pattern.roots)
    return BivirusResult((i, j), [certify(params, r) for r in pattern.roots], limits)


@dataclass
class GenericityReport:
    trials: int
    degenerate_fraction: float
    continuum_fraction: float
    counts: list  # number of equilibria per trial
    kinds: list  # per trial: {kind: count}


def genericity_probe(
    base: TriVirusParams,
    trials: int = 100,
    scale: float = 0.05,
    seed: int = 0,
    starts: int = 20,
) -> GenericityReport:
    """Perturb healing rates by ``exp(U(-scale, scale))`` and re-enumerate.

    Generic parameters give finitely many, nondegenerate equilibria; a
    trial counts as degenerate if any root has a singular Jacobian or a
    continuum of roots survived. Every trial reuses the same enumeration
    seed, so ``scale=0`` repeats the base result exactly.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(seed)
    degenerate = continuum = 0
    counts, kinds = [], []
    for t in range(trials):
        factors = np.exp(rng.uniform(-scale, scale, size=base.delta.shape)) if scale > 0 else 1.0
        params = TriVirusParams(base.delta * factors, base.beta)
        res = enumerate_equilibria(params, starts=starts, seed=seed)
        if res.continuum_suspected:
            continuum += 1
        if res.continuum_suspected or any(e.degenerate for e in res.equilibria):
            degenerate += 1
        counts.append(len(res.equilibria))
        tally = {}
        for e in res.equilibria:
            tally[e.kind] = tally.get(e.kind, 0) + 1
        kinds.append(tally)
    return GenericityReport(
        trials=trials,
        degenerate_fraction=degenerate / trials if trials else 0.0,
        continuum_fraction=continuum / trials if trials else 0.0,
        counts=counts,
        kinds=kinds,
    )
