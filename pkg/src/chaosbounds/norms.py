"""Partition norms V(P, A), the alpha_s scale and the pseudonorms built from A.

Backends by number of blocks of the grouped tensor:

* 1 block  -- Euclidean norm of the flattened array (exact);
* 2 blocks -- spectral norm by power iteration on ``X^T X`` (exact to tol);
* 3+ blocks -- alternating maximisation with restarts.  The value is the
  multilinear form evaluated at the returned unit witness, so it is always
  a lower bound of the true supremum and ``exact`` is False.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import rng
from .errors import ValidationError
from .partitions import SetPartition, partition_Ik, partition_jk, partitions_of_size
from .tensor import (CoefficientTensor, GroupedTensor, as_vector_tuple, contract_set,
                     contract_slot, group_blocks, scaled_norm)

# deterministic start + this many random starts for the matrix backend
MATRIX_RANDOM_STARTS = 3


@dataclass(frozen=True)
class AlsConfig:
    """Search settings for norms that are not available in closed form.

    ``power_iters`` caps the power iteration of the matrix backend; its steps
    are much cheaper than an alternating sweep, hence the separate cap.
    """

    restarts: int = 20
    max_sweeps: int = 500
    tol: float = 1e-8
    seed: int = 0
    power_iters: int = 5000

    def __post_init__(self):
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if not self.tol > 0:
            raise ValidationError("tol must be positive")
        if self.max_sweeps < 1 or self.power_iters < 1:
            raise ValidationError("iteration caps must be >= 1")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")


@dataclass
class NormResult:
    value: float
    exact: bool
    witness: tuple[np.ndarray, ...]
    restarts_used: int = 1
    converged: bool = True
    partition: SetPartition | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "exact": self.exact,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "partition": None if self.partition is None else str(self.partition),
            "witness": [w.tolist() for w in self.witness],
        }


# -- matrix backend ---------------------------------------------------------

def _unit(v: np.ndarray) -> np.ndarray:
    n = scaled_norm(v)
    return v / n if n > 0 else np.zeros_like(v)


def _power_batch(X: np.ndarray, V0: np.ndarray, tol: float, max_iter: int):
    """Power iteration on ``X_b^T X_b`` for every matrix of a stack.

    Each instance stops at its own convergence, so the result for one matrix
    does not depend on what else is in the batch.
    """
    B = np.einsum("bki,bkj->bij", X, X)
    nrm = np.linalg.norm(V0, axis=1)
    v = np.where(nrm[:, None] > 0, V0 / np.where(nrm > 0, nrm, 1.0)[:, None], 0.0)
    done = nrm == 0
    for _ in range(max_iter):
        if done.all():
            break
        w = np.einsum("bij,bj->bi", B, v)
        lam = np.einsum("bi,bi->b", v, w)
        res = np.linalg.norm(w - lam[:, None] * v, axis=1)
        nw = np.linalg.norm(w, axis=1)
        newly = ~done & ((res <= tol * lam) | (nw == 0))
        step = ~done & ~newly
        v[step] = w[step] / nw[step, None]
        done |= newly
    Xv = np.einsum("bij,bj->bi", X, v)
    sigma = np.linalg.norm(Xv, axis=1)
    u = np.where(sigma[:, None] > 0, Xv / np.where(sigma > 0, sigma, 1.0)[:, None], 0.0)
    value = np.einsum("bi,bij,bj->b", u, X, v)
    return value, u, v, done


def _matrix_starts(X: np.ndarray, seed: int) -> list[np.ndarray]:
    """Largest-row unit vector of every matrix, then shared random starts."""
    n = X.shape[2]
    rows = np.linalg.norm(X, axis=2)
    first = X[np.arange(X.shape[0]), np.argmax(rows, axis=1)]
    starts = [first]
    for r in range(1, MATRIX_RANDOM_STARTS + 1):
        g = rng.normals(seed, (rng.ALS_RESTART, r, 1), 0, 1, n)[0]
        starts.append(np.broadcast_to(g, (X.shape[0], n)).copy())
    return starts


def spectral_norm_batch(X: np.ndarray, cfg: AlsConfig | None = None):
    """Largest singular value of each matrix in ``X`` (shape ``(b, m, n)``).

    Returns ``(values, left, right, converged)`` from the best start of each
    instance; ties go to the earliest start.
    """
    cfg = cfg or AlsConfig()
    X = np.asarray(X, dtype=float)
    # per-matrix rescaling keeps X^T X representable for very small or large entries
    scale = np.max(np.abs(X), axis=(1, 2)) if X.size else np.zeros(X.shape[0])
    scale = np.where(scale > 0, scale, 1.0)
    X = X / scale[:, None, None]
    best = None
    for V0 in _matrix_starts(X, cfg.seed):
        val, u, v, conv = _power_batch(X, V0, cfg.tol, cfg.power_iters)
        if best is None:
            best = [val, u, v, conv]
            continue
        better = val > best[0]
        best[0] = np.where(better, val, best[0])
        best[1] = np.where(better[:, None], u, best[1])
        best[2] = np.where(better[:, None], v, best[2])
        best[3] = np.where(better, conv, best[3])
    best[0] = best[0] * scale
    return tuple(best)


# -- higher-order backend ---------------------------------------------------

def _contract_all_but(X: np.ndarray, vs: Sequence[np.ndarray], keep: int) -> np.ndarray:
    out = X
    for ax in reversed(range(X.ndim)):
        if ax != keep:
            out = np.tensordot(out, vs[ax], axes=([ax], [0]))
    return out


def _form(X: np.ndarray, vs: Sequence[np.ndarray]) -> float:
    out = X
    for v in reversed(vs):
        out = out @ v
    return float(out)


def _als_run(X: np.ndarray, vs: list[np.ndarray], cfg: AlsConfig):
    prev = -np.inf
    converged = False
    val = 0.0
    for _ in range(cfg.max_sweeps):
        for r in range(X.ndim):
            c = _contract_all_but(X, vs, r)
            nc = float(np.linalg.norm(c))
            if nc > 0:
                vs[r] = c / nc
            val = nc
        if abs(val - prev) <= cfg.tol * max(val, 1e-300):
            converged = True
            break
        prev = val
    value = _form(X, vs)
    if value < 0:
        vs[0] = -vs[0]
        value = -value
    return value, vs, converged


def _als_starts(X: np.ndarray, restart: int, cfg: AlsConfig) -> list[np.ndarray]:
    if restart == 0:
        starts = []
        for r in range(X.ndim):
            unf = np.moveaxis(X, r, -1).reshape(-1, X.shape[r])
            _, _, v, _ = spectral_norm_batch(unf[None], cfg)
            v = v[0]
            if not np.any(v):
                v = np.zeros(X.shape[r])
                v[0] = 1.0
            starts.append(v)
        return starts
    return [_unit(rng.normals(cfg.seed, (rng.ALS_RESTART, restart, r), 0, 1, X.shape[r])[0])
            for r in range(X.ndim)]


def injective_norm(G: GroupedTensor, cfg: AlsConfig | None = None) -> NormResult:
    """Supremum of the multilinear form of ``G`` over products of unit balls."""
    cfg = cfg or AlsConfig()
    X = G.array
    if not np.any(X):
        return NormResult(0.0, True, tuple(np.zeros(n) for n in X.shape),
                          restarts_used=0, converged=True)
    if X.ndim == 1:
        nrm = scaled_norm(X)
        return NormResult(nrm, True, (X / nrm,), restarts_used=0, converged=True)
    if X.ndim == 2:
        val, u, v, conv = spectral_norm_batch(X[None], cfg)
        return NormResult(float(val[0]), True, (u[0], v[0]),
                          restarts_used=MATRIX_RANDOM_STARTS + 1, converged=bool(conv[0]))
    best = None
    for r in range(cfg.restarts):
        value, vs, conv = _als_run(X, _als_starts(X, r, cfg), cfg)
        if best is None or value > best[0]:
            best = (value, vs, conv)
    value, vs, conv = best
    return NormResult(value, False, tuple(vs), restarts_used=cfg.restarts, converged=conv)


# -- partition norms and the alpha family -------------------------------------

def partition_norm(B: CoefficientTensor, P: SetPartition, cfg: AlsConfig | None = None) -> NormResult:
    """V(P, B) where the ground set of ``P`` labels the slots of ``B`` in ascending order."""
    if len(P.ground) != B.order:
        raise ValidationError(f"partition {P} has {len(P.ground)} elements, tensor has order {B.order}")
    res = injective_norm(group_blocks(B, P.to_unit_range()), cfg)
    res.partition = P
    return res


def _best_over(B: CoefficientTensor, parts: Sequence[SetPartition], cfg: AlsConfig | None) -> NormResult:
    best = None
    exact = True
    for P in parts:
        res = partition_norm(B, P, cfg)
        exact &= res.exact
        if best is None or res.value > best.value:
            best = res
    return replace(best, exact=exact)


def alpha_s(A: CoefficientTensor, s: int, cfg: AlsConfig | None = None) -> NormResult:
    """Maximum of V(P, A) over partitions of {1..d} with ``s`` blocks.

    The argmax partition is stored in ``result.partition``; the first
    partition in enumeration order wins ties.
    """
    if not 1 <= s <= A.order:
        raise ValidationError(f"s={s} must lie in [1, {A.order}]")
    return _best_over(A, partitions_of_size(range(1, A.order + 1), s), cfg)


def alphas(A: CoefficientTensor, cfg: AlsConfig | None = None, upto: int | None = None) -> list[NormResult]:
    """``[alpha_1, ..., alpha_upto]`` (all orders by default)."""
    upto = A.order if upto is None else upto
    return [alpha_s(A, s, cfg) for s in range(1, upto + 1)]


def alpha_tilde_jk(A: CoefficientTensor, j: int, k: int, u_j, cfg: AlsConfig | None = None) -> NormResult:
    """V(P_{j,k}, B^{(j)}_{u_j}): contract slot j with u_j, pair slot k with the last slot."""
    d = A.order
    P = partition_jk(d, j, k)
    return partition_norm(contract_slot(A, j, u_j), P, cfg)


def alpha_tilde_Ik(A: CoefficientTensor, u, I, k: int, M: float = 1,
                   cfg: AlsConfig | None = None) -> NormResult:
    d = A.order
    P = partition_Ik(d, I, k)
    return partition_norm(contract_set(A, I, u, M), P, cfg)


def alpha_uI_s(A: CoefficientTensor, u, I, s: int, M: float = 1,
               cfg: AlsConfig | None = None) -> NormResult:
    d = A.order
    I = sorted(set(I))
    K = [j for j in range(1, d + 1) if j not in I]
    if not 1 <= s <= len(K):
        raise ValidationError(f"s={s} must lie in [1, {len(K)}]")
    B = contract_set(A, I, u, M)
    return _best_over(B, partitions_of_size(K, s), cfg)


def pseudonorm_alpha(A: CoefficientTensor, v) -> float:
    """Euclidean norm over the last slot of ``A`` contracted with ``v`` on slots 1..d-1."""
    if A.order < 2:
        raise ValidationError("the pseudonorm needs order >= 2")
    v = np.asarray(v, dtype=float)
    if v.shape != A.dims[:-1]:
        raise ValidationError(f"argument has shape {v.shape}, expected {A.dims[:-1]}")
    return float(np.linalg.norm(np.tensordot(v, A.coeffs, axes=A.order - 1)))


def chaos_vector(A: CoefficientTensor, u) -> np.ndarray:
    """Coefficients of ``Y_d(u)`` against ``G_d``: ``A`` contracted with ``u_1..u_{d-1}``."""
    u = as_vector_tuple(u, A.dims[:-1])
    out = A.coeffs
    for ax in reversed(range(A.order - 1)):
        out = np.tensordot(out, u[ax], axes=([ax], [0]))
    return out


def rho_alpha(A: CoefficientTensor, u, v) -> float:
    """L2 distance between ``Y_d(u)`` and ``Y_d(v)``."""
    return float(np.linalg.norm(chaos_vector(A, u) - chaos_vector(A, v)))


def rho_alphaIu(A: CoefficientTensor, u, I, M: float, v, vbar) -> float:
    """rho-distance for the tensor contracted on ``I`` by ``u``; coordinates of v in I are ignored."""
    d = A.order
    I = sorted(set(I))
    rest = [j for j in range(1, d) if j not in I]
    B = contract_set(A, I, u, M)
    return rho_alpha(B, [v[j - 1] for j in rest], [vbar[j - 1] for j in rest])
