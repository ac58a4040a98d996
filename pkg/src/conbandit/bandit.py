"""Gaussian posterior over a user's preference vector.

The belief N(mu, l^2 B^{-1}) is parameterised by the inverse-covariance scale
matrix B (started at the identity), the information vector f, and the mean
mu = B^{-1} f. Playing an arm with embedding x and observing a de-biased
reward r' applies the rank-1 update

    B <- B + x x^T,   f <- f + r' x,   mu <- B^{-1} f.

A lower-triangular Cholesky factor of B is kept in sync after every update;
by default it is refreshed with a full refactorisation (maximal robustness at
O(d^3), negligible for the dimensions used here), with an opt-in O(d^2)
rank-1 fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve

from .errors import ContractViolation, DataFormatError, InternalConsistencyError


class ArmKind(str, Enum):
    """Playable arm kinds; the string values define the deterministic sort order."""

    ATTRIBUTE = "attribute"
    ITEM = "item"
    PARENT_ATTRIBUTE = "parent_attribute"


@dataclass(frozen=True, eq=False)
class ArmRef:
    """A playable arm: an item, an attribute, or a parent attribute.

    For parent attributes ``x`` is the unweighted mean of the child vectors.
    """

    kind: ArmKind
    id: int
    x: np.ndarray

    def sort_key(self) -> tuple[str, int]:
        return (self.kind.value, self.id)


@dataclass(frozen=True, eq=False)
class PosteriorState:
    B: np.ndarray
    f: np.ndarray
    mu: np.ndarray
    l: float
    chol_B: np.ndarray

    @property
    def d(self) -> int:
        return self.f.shape[0]


def _check_vector(x: np.ndarray, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ContractViolation("expected a 1-d vector")
    if d is not None and x.shape[0] != d:
        raise ContractViolation(f"dimension mismatch: expected {d}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ContractViolation("non-finite vector entries")
    return x


def init_posterior(u_init: np.ndarray, l: float) -> PosteriorState:
    """Fresh belief: B = I, f = mu = u_init."""
    u_init = _check_vector(u_init)
    if l < 0:
        raise ContractViolation("uncertainty scale l must be >= 0")
    d = u_init.shape[0]
    eye = np.eye(d)
    return PosteriorState(B=eye, f=u_init.copy(), mu=u_init.copy(), l=float(l), chol_B=eye.copy())


def sample_user(state: PosteriorState, rng: np.random.Generator) -> np.ndarray:
    """Draw u ~ N(mu, l^2 B^{-1}) via back-substitution against the Cholesky factor.

    With B = L L^T, the draw mu + l * L^{-T} z (z standard normal) has
    covariance exactly l^2 B^{-1}; l = 0 returns mu itself.
    """
    if state.l == 0.0:
        return state.mu.copy()
    z = rng.standard_normal(state.d)
    y = np.linalg.solve(state.chol_B.T, z)
    return state.mu + state.l * y


def score_arm(u_tilde: np.ndarray, arm: ArmRef, P_u_vectors: Sequence[np.ndarray]) -> float:
    """Unified reward estimate: u.x plus the arm's affinity to each accepted attribute."""
    x = arm.x
    if x.shape != u_tilde.shape:
        raise ContractViolation("arm/user dimension mismatch")
    score = float(x @ u_tilde)
    for p in P_u_vectors:
        if p.shape != x.shape:
            raise ContractViolation("accepted-attribute dimension mismatch")
        score += float(x @ p)
    return score


def debias_reward(
    r: float,
    arm: ArmRef,
    u_init: np.ndarray,
    P_u_vectors: Sequence[np.ndarray],
) -> float:
    """Remove the known bias x.(u_init + sum of accepted attributes) from a raw reward."""
    x = arm.x
    if x.shape != u_init.shape:
        raise ContractViolation("arm/u_init dimension mismatch")
    bias = float(x @ u_init)
    for p in P_u_vectors:
        bias += float(x @ p)
    return r - bias


def _cholesky_rank1_update(L: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Return the Cholesky factor of L L^T + x x^T (classic O(d^2) update)."""
    L = L.copy()
    w = x.copy()
    n = w.shape[0]
    for k in range(n):
        r = math.hypot(L[k, k], w[k])
        c = r / L[k, k]
        s = w[k] / L[k, k]
        L[k, k] = r
        if k + 1 < n:
            L[k + 1 :, k] = (L[k + 1 :, k] + s * w[k + 1 :]) / c
            w[k + 1 :] = c * w[k + 1 :] - s * L[k + 1 :, k]
    return L


def update_posterior(
    state: PosteriorState, arm: ArmRef, r_prime: float, *, fast: bool = False
) -> PosteriorState:
    """Rank-1 posterior update; returns a new state with the factor refreshed.

    ``fast=True`` uses the O(d^2) rank-1 factor update instead of a full
    refactorisation; both paths agree to well under 1e-8.
    """
    x = _check_vector(arm.x, state.d)
    if not math.isfinite(r_prime):
        raise ContractViolation("non-finite reward")
    B = state.B + np.outer(x, x)
    f = state.f + r_prime * x
    if fast:
        chol = _cholesky_rank1_update(state.chol_B, x)
    else:
        try:
            chol = np.linalg.cholesky(B)
        except np.linalg.LinAlgError as exc:
            raise InternalConsistencyError(
                "posterior scale matrix lost positive definiteness"
            ) from exc
    mu = cho_solve((chol, True), f, check_finite=False)
    return PosteriorState(B=B, f=f, mu=mu, l=state.l, chol_B=chol)


def update_f_only(state: PosteriorState, arm: ArmRef, r_prime: float) -> PosteriorState:
    """Information-vector update with B held fixed (mu re-solved against the old factor)."""
    x = _check_vector(arm.x, state.d)
    f = state.f + r_prime * x
    mu = cho_solve((state.chol_B, True), f, check_finite=False)
    return PosteriorState(B=state.B, f=f, mu=mu, l=state.l, chol_B=state.chol_B)


def ucb_score(
    A: np.ndarray,
    u_vec: np.ndarray,
    arm: ArmRef,
    P_u_vectors: Sequence[np.ndarray],
    alpha: float,
) -> float:
    """Mean estimate plus an additive confidence bound alpha * sqrt(x^T A^{-1} x)."""
    if alpha < 0:
        raise ContractViolation("alpha must be >= 0")
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ContractViolation("A must be symmetric positive definite") from exc
    x = arm.x
    w = cho_solve((chol, True), x, check_finite=False)
    width = math.sqrt(max(float(x @ w), 0.0))
    return score_arm(u_vec, arm, P_u_vectors) + alpha * width


def validate_posterior(state: PosteriorState, rtol: float = 1e-10) -> None:
    """Assert the state invariants: B SPD with a consistent factor, mu = B^{-1} f."""
    if state.l < 0:
        raise InternalConsistencyError("negative uncertainty scale")
    if not np.allclose(state.B, state.B.T, rtol=0, atol=1e-12):
        raise InternalConsistencyError("B is not symmetric")
    recon = state.chol_B @ state.chol_B.T
    denom = max(float(np.linalg.norm(state.B)), 1e-300)
    if float(np.linalg.norm(recon - state.B)) / denom > rtol:
        raise InternalConsistencyError("Cholesky factor out of sync with B")
    resid = state.B @ state.mu - state.f
    denom = max(float(np.linalg.norm(state.f)), 1.0)
    if float(np.linalg.norm(resid)) / denom > rtol:
        raise InternalConsistencyError("mu is not B^{-1} f")


def write_snapshot(state: PosteriorState, path: str | Path) -> None:
    """Persist (d, B row-major, f, mu) as one array per line."""
    def fmt(a: np.ndarray) -> str:
        return " ".join(f"{x:.17g}" for x in np.asarray(a).ravel())

    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{state.d}\n")
        fh.write(fmt(state.B) + "\n")
        fh.write(fmt(state.f) + "\n")
        fh.write(fmt(state.mu) + "\n")


def read_snapshot(path: str | Path, l: float = 0.0) -> PosteriorState:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if len(lines) < 4:
        raise DataFormatError(str(path), len(lines), "expected 4 lines (d, B, f, mu)")
    d = int(lines[0])
    B = np.array([float(x) for x in lines[1].split()], dtype=np.float64).reshape(d, d)
    f = np.array([float(x) for x in lines[2].split()], dtype=np.float64)
    mu = np.array([float(x) for x in lines[3].split()], dtype=np.float64)
    try:
        chol = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise DataFormatError(str(path), 2, "stored B is not positive definite") from exc
    state = PosteriorState(B=B, f=f, mu=mu, l=float(l), chol_B=chol)
    validate_posterior(state, rtol=1e-8)
    return state
