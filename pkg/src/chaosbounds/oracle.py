"""Ground truth for chaos moments: exact Wick sums, a d=2 eigenvalue route,
and seeded Monte-Carlo samplers.

Exact moments
-------------
``E Y^{2M}`` expands into a sum over ``2M`` multi-indices
``i^{(1)}, ..., i^{(2M)}`` of ``prod_m a(i^{(m)})`` times, for every slot
``j``, the joint moment ``E prod_m g_j(i_j^{(m)})``.  That moment factorises
over the values taken by the slot-``j`` coordinates: a value appearing
``c`` times contributes ``E g^c`` (0 for odd ``c``, ``(c-1)!!`` for even).
The per-slot moment tables are small symmetric arrays, and the full sum is
evaluated as a contraction of ``2M`` copies of ``A`` against them, one slot
at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import rng
from .errors import CapacityError, ValidationError
from .norms import AlsConfig, chaos_vector, injective_norm, spectral_norm_batch
from .partitions import SetPartition
from .tensor import CoefficientTensor, contract_batch, group_blocks

DEFAULT_WICK_BUDGET = 10**8
HEAVY_TAIL_KURTOSIS = 100.0
Z95 = 1.959963984540054


def double_factorial_odd(M: int) -> int:
    """``1 * 3 * ... * (2M-1)``, with the empty product for ``M = 0``."""
    return math.prod(range(1, 2 * M, 2))


def gaussian_moment(c: int) -> int:
    return 0 if c % 2 else double_factorial_odd(c // 2)


def _slot_moment_table(n: int, K: int) -> np.ndarray:
    """``E prod_{m<K} g(i_m)`` for every index tuple in ``[n]^K``."""
    mu = np.array([gaussian_moment(c) for c in range(K + 1)], dtype=float)
    idx = np.indices((n,) * K).reshape(K, -1)
    out = np.ones(idx.shape[1])
    for v in range(n):
        out *= mu[(idx == v).sum(axis=0)]
    return out.reshape((n,) * K)


def wick_moment(A: CoefficientTensor, M: int, budget: int = DEFAULT_WICK_BUDGET) -> float:
    """Exact ``E Y(A)^{2M}`` for the decoupled chaos with coefficients ``A``."""
    if M < 1:
        raise ValidationError("M must be >= 1")
    K = 2 * M
    need = math.prod(A.dims) ** K
    if need > budget:
        raise CapacityError(f"Wick enumeration needs {need} multi-index tuples, budget is {budget}")
    dims = A.dims
    rest = math.prod(dims[1:])
    S = _slot_moment_table(dims[0], K)
    A1 = A.coeffs.reshape(dims[0], rest)
    # attach the K copies of A through slot 1; each step turns one slot-1 leg into a "rest" leg
    for _ in range(K):
        S = np.tensordot(S, A1, axes=([0], [0]))
    for j in range(1, len(dims)):
        n, rest = dims[j], rest // dims[j]
        S = S.reshape((n, rest) * K)
        S = np.tensordot(S, _slot_moment_table(n, K), axes=(list(range(0, 2 * K, 2)), list(range(K))))
    return float(S.reshape(-1)[0])


def jacobi_eigenvalues(S: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(S, dtype=float, copy=True)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ValidationError("jacobi_eigenvalues needs a symmetric square matrix")
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
    return np.sort(np.diag(a))


def quadratic_form_moments(eigs: Sequence[float], M: int) -> list[float]:
    """``E Q^m`` for ``m = 0..M`` where ``Q = sum_i lambda_i g_i^2``.

    Uses cumulants ``kappa_r = 2^{r-1} (r-1)! sum lambda^r`` and the
    recursion ``mu_m = sum_k C(m-1, k-1) kappa_k mu_{m-k}``.
    """
    eigs = np.asarray(eigs, dtype=float)
    kappa = [0.0] + [2.0 ** (r - 1) * math.factorial(r - 1) * float(np.sum(eigs ** r))
                     for r in range(1, M + 1)]
    mu = [1.0]
    for m in range(1, M + 1):
        mu.append(sum(math.comb(m - 1, k - 1) * kappa[k] * mu[m - k] for k in range(1, m + 1)))
    return mu


def quad_form_moment_d2(A: CoefficientTensor, M: int) -> float:
    """``E Y^{2M}`` for ``d = 2`` from the eigenvalues of ``A A^T``.

    Conditionally on ``G_2``, ``Y`` is centred normal with variance
    ``|A G_2|^2``, so ``E Y^{2M} = (2M-1)!! E (G^T A^T A G)^M``.
    """
    if A.order != 2:
        raise ValidationError("quad_form_moment_d2 needs an order-2 tensor")
    if M < 1:
        raise ValidationError("M must be >= 1")
    X = A.coeffs
    gram = X @ X.T if X.shape[0] <= X.shape[1] else X.T @ X
    eigs = jacobi_eigenvalues(gram)
    return double_factorial_odd(M) * quadratic_form_moments(eigs, M)[M]


# -- Monte Carlo -------------------------------------------------------------

def sample_Y(A: CoefficientTensor, count: int, seed: int) -> np.ndarray:
    """Independent draws of ``Y(A)``; slot ``j`` reads its own normal stream."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    out = np.empty(count)
    for start, n in rng.chunks(count):
        gs = {j: rng.normals(seed, (rng.Y_SLOT, j + 1), start, n, A.dims[j]) for j in range(A.order)}
        out[start:start + n] = contract_batch(A.coeffs, gs)
    return out


def sample_Y_d(A: CoefficientTensor, u, count: int, seed: int) -> np.ndarray:
    """Draws of ``Y_d(u) = <A contracted with u_1..u_{d-1}, G_d>``."""
    c = chaos_vector(A, u)
    out = np.empty(count)
    for start, n in rng.chunks(count):
        out[start:start + n] = rng.normals(seed, (rng.Y_D,), start, n, A.dims[-1]) @ c
    return out


def sample_Z(A: CoefficientTensor, count: int, seed: int, cfg: AlsConfig | None = None) -> np.ndarray:
    """Draws of ``sup_u Y_d(u)`` over products of unit balls.

    For order 2 this is ``|A G_2|``, for order 3 a spectral norm; from order
    4 on the alternating search gives lower bounds.
    """
    if A.order < 2:
        raise ValidationError("sample_Z needs order >= 2")
    cfg = cfg or AlsConfig()
    d = A.order
    out = np.empty(count)
    singletons = SetPartition.from_blocks([[j] for j in range(1, d)])
    for start, n in rng.chunks(count):
        G = rng.normals(seed, (rng.Z_SUP,), start, n, A.dims[-1])
        if d == 2:
            out[start:start + n] = np.linalg.norm(G @ A.coeffs.T, axis=1)
            continue
        B = contract_batch(A.coeffs, {d - 1: G})
        if d == 3:
            out[start:start + n] = spectral_norm_batch(B, cfg)[0]
        else:
            for i in range(n):
                out[start + i] = injective_norm(group_blocks(CoefficientTensor(B[i]), singletons), cfg).value
    return out


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z / den * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class Statistic:
    """``moment`` (mean of Y^{2M}), ``tail`` (frequency of |Y| > x) or ``sup_moment`` (mean of Z^{2M})."""

    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("moment", "tail", "sup_moment"):
            raise ValidationError(f"unknown statistic {self.kind!r}")
        if self.kind in ("moment", "sup_moment") and (self.param < 1 or self.param != int(self.param)):
            raise ValidationError("moment statistics need an integer M >= 1")
        if self.kind == "tail" and not self.param > 0:
            raise ValidationError("tail statistics need x > 0")

    @classmethod
    def parse(cls, text: str) -> "Statistic":
        """Parse ``moment(2)``, ``tail(3.5)`` or ``sup_moment(1)``."""
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise ValidationError(f"statistic must look like 'moment(2)', got {text!r}")
        kind, arg = text[:-1].split("(", 1)
        return cls(kind.strip(), float(arg))

    def __str__(self) -> str:
        p = int(self.param) if self.kind != "tail" else self.param
        return f"{self.kind}({p})"


@dataclass
class ChaosStudy:
    seed: int
    n_samples: int
    statistic: str
    param: float
    estimate: float
    std_error: float
    ci95: tuple[float, float]
    heavy_tail: bool = False
    extra: dict = field(default_factory=dict)

    CSV_HEADER = ("statistic", "param", "estimate", "se", "lo", "hi", "n", "seed")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic, "param": self.param, "estimate": self.estimate,
            "std_error": self.std_error, "ci95": list(self.ci95), "n_samples": self.n_samples,
            "seed": self.seed, "heavy_tail": self.heavy_tail, **self.extra,
        }

    def csv_row(self) -> tuple:
        return (self.statistic, self.param, self.estimate, self.std_error,
                self.ci95[0], self.ci95[1], self.n_samples, self.seed)


def mean_study(values: np.ndarray, *, seed: int, statistic: str, param: float,
               extra: dict | None = None) -> ChaosStudy:
    """Sample mean of ``values`` with a CLT standard error and a heavy-tail flag."""
    n = len(values)
    est = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    heavy = bool(n > 3 and np.std(values) > 0 and stats.kurtosis(values, fisher=False) > HEAVY_TAIL_KURTOSIS)
    return ChaosStudy(seed, n, statistic, param, est, se, (est - Z95 * se, est + Z95 * se),
                      heavy, extra or {})


def frequency_study(hits: np.ndarray, *, seed: int, statistic: str, param: float,
                    extra: dict | None = None) -> ChaosStudy:
    n = len(hits)
    k = int(np.count_nonzero(hits))
    p = k / n
    return ChaosStudy(seed, n, statistic, param, p, math.sqrt(p * (1 - p) / n),
                      wilson_interval(k, n), False, extra or {})


def empirical_statistic(A: CoefficientTensor, statistic: Statistic | str, count: int, seed: int,
                        cfg: AlsConfig | None = None) -> ChaosStudy:
    """Seeded Monte-Carlo estimate of a moment, tail frequency or supremum moment."""
    if isinstance(statistic, str):
        statistic = Statistic.parse(statistic)
    if statistic.kind == "tail":
        y = sample_Y(A, count, seed)
        return frequency_study(np.abs(y) > statistic.param, seed=seed,
                               statistic="tail", param=statistic.param)
    M = int(statistic.param)
    draws = sample_Y(A, count, seed) if statistic.kind == "moment" else sample_Z(A, count, seed, cfg)
    return mean_study(draws ** (2 * M), seed=seed, statistic=statistic.kind, param=M)
