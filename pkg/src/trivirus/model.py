"""Competing-virus networked SIS model: parameters, vector field and Jacobian.

States are arrays of shape ``(m, n)``: row ``k`` holds the infection
fractions of virus ``k`` over the ``n`` nodes. Functions also accept the
stacked length ``m * n`` vector and return stacked vectors, matching the
layout ``(x1_1..x1_n, x2_1..x2_n, ...)`` used by the integrator and the CSV
export.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class DomainViolation:
    """A single way in which a state lies outside the feasible set."""

    node: int
    virus: Union[int, str]  # virus index, or "sum" for the per-node total
    value: float
    magnitude: float


class DomainError(ValueError):
    def __init__(self, violations: Sequence[DomainViolation]):
        self.violations = list(violations)
        worst = max(self.violations, key=lambda v: v.magnitude)
        super().__init__(
            f"state outside the feasible domain ({len(self.violations)} violations; "
            f"worst: node {worst.node}, virus {worst.virus}, value {worst.value!r})"
        )


def _as_float_array(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class TriVirusParams:
    """Healing rates ``delta[k]`` and infection matrices ``beta[k]``.

    ``beta[k][i, j]`` is the rate at which node ``i`` is infected with virus
    ``k`` by infected individuals of node ``j``. Storage is general in the
    number of viruses ``m``; the theorem checkers require ``m == 3``.
    """

    delta: np.ndarray  # (m, n)
    beta: np.ndarray  # (m, n, n)

    def __post_init__(self):
        delta = _as_float_array(self.delta, "delta")
        beta = _as_float_array(self.beta, "beta")
        if delta.ndim != 2 or beta.ndim != 3:
            raise ValueError("delta must be (m, n) and beta (m, n, n)")
        m, n = delta.shape
        if n < 1 or m < 1:
            raise ValueError("need at least one node and one virus")
        if beta.shape != (m, n, n):
            raise ValueError(f"beta has shape {beta.shape}, expected {(m, n, n)}")
        if np.any(delta <= 0):
            raise ValueError("healing rates must be strictly positive")
        if np.any(beta < 0):
            raise ValueError("infection rates must be nonnegative")
        delta.setflags(write=False)
        beta.setflags(write=False)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_matrices(cls, betas, deltas=None) -> "TriVirusParams":
        """Build from a list of infection matrices; healing rates default to 1."""
        betas = [np.asarray(b, dtype=float) for b in betas]
        n = betas[0].shape[0]
        if deltas is None:
            deltas = [np.ones(n) for _ in betas]
        return cls(np.array([np.asarray(d, dtype=float) for d in deltas]), np.array(betas))

    @property
    def m(self) -> int:
        return self.delta.shape[0]

    @property
    def n(self) -> int:
        return self.delta.shape[1]

    def D(self, k: int) -> np.ndarray:
        return np.diag(self.delta[k])

    def scaled_beta(self, k: int) -> np.ndarray:
        """``(D^k)^{-1} B^k``, the matrix whose ordering and spectra the theorems compare."""
        return self.beta[k] / self.delta[k][:, None]

    def irreducible(self, k: int) -> bool:
        from .spectral import is_irreducible

        return is_irreducible(self.beta[k])

    def all_irreducible(self) -> bool:
        return all(self.irreducible(k) for k in range(self.m))

    def subsystem(self, viruses: Sequence[int]) -> "TriVirusParams":
        idx = list(viruses)
        return TriVirusParams(self.delta[idx], self.beta[idx])

    def permuted(self, order: Sequence[int]) -> "TriVirusParams":
        """Relabel viruses: new virus ``k`` is old virus ``order[k]``."""
        if sorted(order) != list(range(self.m)):
            raise ValueError(f"{order!r} is not a permutation of the viruses")
        return self.subsystem(order)

    def normalized(self) -> "TriVirusParams":
        """Equivalent system with unit healing rates and ``B' = D^{-1} B``.

        Both systems have the same equilibria (the vector fields differ by
        the positive diagonal factor ``D``); stability need not carry over.
        """
        return TriVirusParams(
            np.ones_like(self.delta), np.array([self.scaled_beta(k) for k in range(self.m)])
        )

    def to_dict(self) -> dict:
        return {"delta": self.delta.tolist(), "beta": self.beta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "TriVirusParams":
        return cls(np.array(d["delta"], dtype=float), np.array(d["beta"], dtype=float))

    def __eq__(self, other):
        if not isinstance(other, TriVirusParams):
            return NotImplemented
        return np.array_equal(self.delta, other.delta) and np.array_equal(self.beta, other.beta)

    __hash__ = None


def as_blocks(x, m: int, n: int) -> np.ndarray:
    """View a stacked or ``(m, n)`` state as an ``(m, n)`` float array."""
    arr = np.asarray(x, dtype=float)
    if arr.shape == (m * n,):
        return arr.reshape(m, n)
    if arr.shape != (m, n):
        raise ValueError(f"state has shape {arr.shape}, expected {(m, n)} or {(m * n,)}")
    return arr


def validate_state(x, tol: float = DOMAIN_TOL) -> list[DomainViolation]:
    """Violations of ``0 <= x[k][i] <= 1`` and ``sum_k x[k][i] <= 1`` beyond ``tol``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    violations = []
    m, n = x.shape
    for k in range(m):
        for i in range(n):
            v = x[k, i]
            if not np.isfinite(v):
                violations.append(DomainViolation(i, k, float(v), float("inf")))
            elif v < -tol:
                violations.append(DomainViolation(i, k, float(v), float(-v)))
            elif v > 1.0 + tol:
                violations.append(DomainViolation(i, k, float(v), float(v - 1.0)))
    totals = x.sum(axis=0)
    for i in range(n):
        if np.isfinite(totals[i]) and totals[i] > 1.0 + tol:
            violations.append(DomainViolation(i, "sum", float(totals[i]), float(totals[i] - 1.0)))
    return violations


def rhs(params: TriVirusParams, x: np.ndarray) -> np.ndarray:
    """Unchecked vector field on an ``(m, n)`` array; returns ``(m, n)``."""
    healthy = 1.0 - x.sum(axis=0)
    infection = np.einsum("kij,kj->ki", params.beta, x)
    return healthy * infection - params.delta * x


def vector_field(params: TriVirusParams, x, tol: float = DOMAIN_TOL) -> np.ndarray:
    """``dx^k/dt = ((I - sum_l X^l) B^k - D^k) x^k`` for every virus, stacked.

    Raises DomainError if the state is outside the feasible set by more than
    ``tol``.
    """
    xb = as_blocks(x, params.m, params.n)
    violations = validate_state(xb, tol)
    if violations:
        raise DomainError(violations)
    return rhs(params, xb).ravel()


def jacobian(params: TriVirusParams, x) -> np.ndarray:
    """Exact ``(m n) x (m n)`` Jacobian of the vector field.

    Diagonal block ``k`` is ``-D^k + (I - sum_l X^l) B^k - diag(B^k x^k)``;
    off-diagonal block ``(k, l)`` is ``-diag(B^k x^k)``.
    """
    m, n = params.m, params.n
    xb = as_blocks(x, m, n)
    if not np.all(np.isfinite(xb)):
        raise ValueError("state contains non-finite entries")
    healthy = 1.0 - xb.sum(axis=0)
    J = np.empty((m * n, m * n))
    for k in range(m):
        coupling = -np.diag(params.beta[k] @ xb[k])
        rows = slice(k * n, (k + 1) * n)
        for l in range(m):
            J[rows, l * n:(l + 1) * n] = coupling
        J[rows, rows] += healthy[:, None] * params.beta[k] - np.diag(params.delta[k])
    return J
