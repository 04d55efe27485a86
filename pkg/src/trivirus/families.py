"""Nongeneric parameter families with lines and planes of equilibria.

All constructions assume unit healing rates, except the identical-virus
plane, which allows any shared positive healing vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibria import PreconditionError, single_virus_equilibrium
from .model import TriVirusParams, jacobian, rhs
from .spectral import is_irreducible, sign_verdict, spectral_abscissa, spectral_radius

ATTRACTIVE = "attractive"
UNSTABLE = "unstable"
INCONCLUSIVE = "inconclusive"

RESIDUAL_TOL = 1e-9


def make_stochastic_like_c(z, M) -> np.ndarray:
    """``C = diag(z) diag(M z)^{-1} M``: same zero pattern as ``M`` and ``C z = z``."""
    z = np.asarray(z, dtype=float)
    M = np.asarray(M, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be strictly positive")
    if np.any(M < 0) or not is_irreducible(M):
        raise ValueError("pattern matrix must be nonnegative and irreducible")
    Mz = M @ z
    if np.any(Mz <= 0):
        raise ValueError("M z has a zero entry")
    return (z / Mz)[:, None] * M


def _require_unit_healing(delta):
    if delta is not None and not np.allclose(delta, 1.0, rtol=0, atol=0):
        raise PreconditionError("line and plane constructions require unit healing rates")


def _simplex_projection(c: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{a >= 0, sum a = 1}``."""
    u = np.sort(c)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, len(c) + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(c - theta, 0.0)


@dataclass
class LineFamily:
    """Equilibria ``(b z, (1 - b) z, 0)`` for ``b`` in ``[0, 1]``."""

    z: np.ndarray
    B1: np.ndarray
    C: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    abscissa: float  # s(-I + (I - Z) B3)
    radius: float  # rho((I - Z) B3)
    attractivity: str
    kind: str = field(default="line", init=False)

    @property
    def params(self) -> TriVirusParams:
        return TriVirusParams.from_matrices([self.B1, self.B2, self.B3])

    def point(self, b: float) -> np.ndarray:
        return np.array([b * self.z, (1.0 - b) * self.z, np.zeros_like(self.z)])

    def project(self, state) -> tuple[float, float]:
        """Distance from ``state`` to the segment and the closest ``b``."""
        x = np.asarray(state, dtype=float).reshape(3, -1)
        zz = self.z @ self.z
        b = (x[0] @ self.z - x[1] @ self.z + zz) / (2.0 * zz)
        b = float(np.clip(b, 0.0, 1.0))
        return float(np.linalg.norm(x - self.point(b))), b


def build_line_family(B1, M, B3, delta=None) -> LineFamily:
    """``B2 = (I - Z)^{-1} C`` with ``z`` the endemic state of ``B1`` and ``C`` built from ``M``.

    Attractivity follows the sign of ``s(-I + (I - Z) B3)``.
    """
    _require_unit_healing(delta)
    B1, M, B3 = (np.asarray(a, dtype=float) for a in (B1, M, B3))
    for name, a in (("B1", B1), ("M", M), ("B3", B3)):
        if np.any(a < 0) or not is_irreducible(a):
            raise ValueError(f"{name} must be nonnegative and irreducible")
    n = B1.shape[0]
    z = single_virus_equilibrium(np.ones(n), B1)
    if z is None:
        raise PreconditionError("rho(B1) <= 1: virus 1 has no endemic equilibrium")
    C = make_stochastic_like_c(z, M)
    B2 = C / (1.0 - z)[:, None]
    inner = (1.0 - z)[:, None] * B3
    s = spectral_abscissa(inner - np.eye(n))
    verdict = {-1: ATTRACTIVE, 1: UNSTABLE, 0: INCONCLUSIVE}[sign_verdict(s, 0.0)]
    fam = LineFamily(z, B1, C, B2, B3, s, spectral_radius(inner), verdict)
    p = fam.params
    for b in (0.0, 0.25, 0.5, 0.75, 1.0):
        res = np.max(np.abs(rhs(p, fam.point(b))))
        if res >= RESIDUAL_TOL:
            raise RuntimeError(f"line point b={b} has residual {res:.3g}")
    return fam


@dataclass
class PlaneFamily:
    """Equilibria ``(a1 w, a2 w, a3 w)`` with ``a`` on the unit simplex.

    ``w`` is the shared endemic state: ``x~`` for identical viruses, ``z``
    for the general construction.
    """

    mode: str  # "identical" or "general"
    anchor: np.ndarray
    params: TriVirusParams
    C: Optional[np.ndarray] = None
    C_hat: Optional[np.ndarray] = None
    kind: str = field(default="plane", init=False)

    def point(self, alpha) -> np.ndarray:
        alpha = np.asarray(alpha, dtype=float)
        return alpha[:, None] * self.anchor[None, :]

    def project(self, state) -> tuple[float, np.ndarray]:
        """Distance to the plane section and the closest simplex weights."""
        x = np.asarray(state, dtype=float).reshape(3, -1)
        ww = self.anchor @ self.anchor
        alpha = _simplex_projection(x @ self.anchor / ww)
        return float(np.linalg.norm(x - self.point(alpha))), alpha

    def sample(self, count: int, seed=None) -> list:
        rng = np.random.default_rng(seed)
        return [self.point(a) for a in rng.dirichlet(np.ones(3), size=count)]


def _check_plane(fam: PlaneFamily, seed: int = 0) -> PlaneFamily:
    for x in fam.sample(10, seed) + [fam.point(np.eye(3)[k]) for k in range(3)]:
        res = np.max(np.abs(rhs(fam.params, x)))
        if res >= RESIDUAL_TOL:
            raise RuntimeError(f"plane point has residual {res:.3g}")
    return fam


def build_plane_identical(B, delta=None) -> PlaneFamily:
    """Three identical copies of one virus ``(D, B)`` with ``rho(D^{-1} B) > 1``."""
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    delta = np.ones(n) if delta is None else np.asarray(delta, dtype=float)
    if not is_irreducible(B):
        raise ValueError("B must be irreducible")
    anchor = single_virus_equilibrium(delta, B)
    if anchor is None:
        raise PreconditionError("rho(D^-1 B) <= 1: no endemic equilibrium")
    params = TriVirusParams(np.array([delta] * 3), np.array([B] * 3))
    return _check_plane(PlaneFamily("identical", anchor, params))


def build_plane_general(B1, M, M_hat, delta=None) -> PlaneFamily:
    """``B2 = (I - Z)^{-1} C`` and ``B3 = (I - Z)^{-1} C_hat`` with ``C != C_hat``."""
    _require_unit_healing(delta)
    B1 = np.asarray(B1, dtype=float)
    n = B1.shape[0]
    z = single_virus_equilibrium(np.ones(n), B1)
    if z is None:
        raise PreconditionError("rho(B1) <= 1: virus 1 has no endemic equilibrium")
    C = make_stochastic_like_c(z, M)
    C_hat = make_stochastic_like_c(z, M_hat)
    if np.allclose(C, C_hat, rtol=0, atol=1e-14):
        raise ValueError("C_hat equals C, so B3 = B2; use distinct pattern matrices")
    params = TriVirusParams.from_matrices([B1, C / (1.0 - z)[:, None], C_hat / (1.0 - z)[:, None]])
    return _check_plane(PlaneFamily("general", z, params, C, C_hat))


def build_plane_family(mode: str, **inputs) -> PlaneFamily:
    if mode == "identical":
        return build_plane_identical(inputs["B"], inputs.get("delta"))
    if mode == "general":
        return build_plane_general(inputs["B1"], inputs["M"], inputs["M_hat"], inputs.get("delta"))
    raise ValueError(f"unknown plane mode {mode!r}")


def distance_to_family(family, state) -> float:
    return family.project(state)[0]


def line_jacobian_structure(fam: LineFamily, b: float, tol: float = 1e-7) -> tuple[int, float]:
    """Number of eigenvalues within ``tol`` of zero and the largest real part of the rest."""
    eig = np.linalg.eigvals(jacobian(fam.params, fam.point(b)))
    near_zero = np.abs(eig) < tol
    rest = eig[~near_zero].real
    return int(near_zero.sum()), float(rest.max()) if rest.size else -np.inf


@dataclass
class PlaneDiagnostics:
    u_tilde: np.ndarray  # left null vector of Q, u~' x~ = 1
    P: np.ndarray  # diag(u~_i / x~_i)
    R: np.ndarray  # I - x~ u~'
    Q_bar: np.ndarray  # P Q + Q' P
    lambda2: float
    times: np.ndarray
    V: np.ndarray  # (3, T) Lyapunov values per virus
    orthogonality: float  # max |u~' zeta| over the series
    slopes: list  # fitted decay rate of log V per virus after the transient
    transient: float


def plane_matrices(fam: PlaneFamily):
    """``Q = D - (I - X~) B``, its left null vector, the weights ``P`` and ``Q_bar``."""
    if fam.mode != "identical":
        raise ValueError("Lyapunov diagnostics need the identical-virus plane")
    delta, B = fam.params.delta[0], fam.params.beta[0]
    x = fam.anchor
    Q = np.diag(delta) - (1.0 - x)[:, None] * B
    w, U = np.linalg.eig(Q.T)
    u = np.real(U[:, np.argmin(np.abs(w))])
    u = u / (u @ x)
    P = np.diag(u / x)
    R = np.eye(len(x)) - np.outer(x, u)
    Q_bar = P @ Q + Q.T @ P
    return Q, u, P, R, Q_bar


def plane_diagnostics(fam: PlaneFamily, traj, transient: Optional[float] = None, floor: float = 1e-18) -> PlaneDiagnostics:
    """Lyapunov values ``V = zeta' P zeta`` with ``zeta = R x^k`` along a trajectory.

    After the transient (default: a tenth of the trajectory), a line is
    fitted to ``log V`` up to the first sample below ``floor``, where
    integration noise takes over. Its slope is the reported decay rate
    (None when V is already below the floor at the transient).
    """
    Q, u, P, R, Q_bar = plane_matrices(fam)
    ev = np.sort(np.linalg.eigvalsh(0.5 * (Q_bar + Q_bar.T)))
    positive = ev[ev > 1e-9]
    lambda2 = float(positive[0]) if positive.size else 0.0
    times = np.asarray(traj.times)
    states = np.asarray(traj.states)
    zeta = np.einsum("ij,tkj->tki", R, states)  # (T, 3, n)
    V = np.einsum("tki,i,tki->kt", zeta, np.diag(P), zeta)
    orth = float(np.max(np.abs(zeta @ u)))
    t0 = times[-1] / 10.0 if transient is None else transient
    start = int(np.searchsorted(times, t0))
    if len(times) - start < 50:
        raise ValueError(f"only {len(times) - start} samples after the transient; need 50")
    slopes = []
    for k in range(3):
        below = np.nonzero(V[k, start:] <= floor)[0]
        stop = start + (below[0] if below.size else len(times) - start)
        if stop - start < 2:
            slopes.append(None)
            continue
        slope, _ = np.polyfit(times[start:stop], np.log(V[k, start:stop]), 1)
        slopes.append(float(slope))
    return PlaneDiagnostics(u, P, R, Q_bar, lambda2, times, V, orth, slopes, float(t0))
