"""Moment and tail bounds expressed through the alpha_s scale.

The bound constant ``C`` is a free parameter.  ``fit_c_moments`` and
``fit_c_tail`` report the smallest ``C`` that makes the bound hold on a
supplied set of (tensor, measured value) pairs; nothing here asserts a
particular value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import oracle, rng
from .errors import ValidationError
from .norms import AlsConfig, NormResult, alpha_tilde_jk, alphas
from .tensor import CoefficientTensor

LOG_OVERFLOW = 700.0  # exp() of anything above this is stored in log form only


@dataclass(frozen=True)
class AlphaValue:
    s: int
    value: float
    exact: bool


def _alpha_values(results: Sequence[NormResult]) -> list[AlphaValue]:
    return [AlphaValue(s, r.value, r.exact) for s, r in enumerate(results, start=1)]


@dataclass
class BoundReport:
    M: int
    alphas: list[AlphaValue]
    raw_factor: float
    log_moment_bound: float
    moment_bound: float
    in_log_domain: bool
    C_used: float
    dims: tuple[int, ...] = ()
    seed: int | None = None
    tail_x: float | None = None
    tail_bound: float | None = None
    contributions: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims), "M": self.M, "C": self.C_used, "seed": self.seed,
            "alphas": [{"s": a.s, "value": a.value, "exact": a.exact} for a in self.alphas],
            "contributions": self.contributions, "raw_factor": self.raw_factor,
            "log_moment_bound": self.log_moment_bound,
            "moment_bound": None if self.in_log_domain else self.moment_bound,
            "in_log_domain": self.in_log_domain,
            "tail_x": self.tail_x, "tail_bound": self.tail_bound,
        }


def _check_M(M: int) -> None:
    if int(M) != M or M < 1:
        raise ValidationError(f"M must be a positive integer, got {M}")


def check_normalization(A: CoefficientTensor, M: int, upto: int | None = None,
                        cfg: AlsConfig | None = None, slack: float = 1e-12):
    """Test ``alpha_s <= M^{-(s-1)/2}`` for ``s = 1..upto``.

    Returns ``(ok, margins, exact)`` where ``margins[s-1] = M^{-(s-1)/2} - alpha_s``.
    When some alpha came from the alternating search (``exact`` False) the
    computed value is a lower bound, so ``ok`` is only a necessary condition.
    """
    _check_M(M)
    d = A.order
    upto = d if upto is None else upto
    if upto not in (d - 1, d) or upto < 1:
        raise ValidationError(f"upto must be d-1 or d (d={d}), got {upto}")
    res = alphas(A, cfg, upto)
    margins = [M ** (-(s - 1) / 2) - r.value for s, r in enumerate(res, start=1)]
    ok = all(m >= -slack for m in margins)
    return ok, margins, all(r.exact for r in res)


def normalization_D(values: Sequence[float], M: int) -> float:
    """``max_s M^{(s-1)/2} alpha_s`` for ``values = [alpha_1, ...]``."""
    return max(M ** ((s - 1) / 2) * a for s, a in enumerate(values, start=1))


def normalize_DM(A: CoefficientTensor, M: int, cfg: AlsConfig | None = None):
    """``(A / D, D)`` where ``D = max_s M^{(s-1)/2} alpha_s``."""
    _check_M(M)
    D = normalization_D([r.value for r in alphas(A, cfg)], M)
    if D == 0.0:
        raise ValidationError("the zero tensor cannot be normalised")
    return CoefficientTensor(A.coeffs / D), D


def moment_bound_from_alphas(values: Sequence[float], M: int, C: float):
    """``(raw_factor, log_bound, bound, in_log_domain, contributions)``."""
    _check_M(M)
    if not C > 0:
        raise ValidationError("C must be positive")
    contributions = [M ** (s / 2) * a for s, a in enumerate(values, start=1)]
    raw = max(contributions)
    if raw == 0.0:
        return raw, -math.inf, 0.0, False, contributions
    log_bound = 2 * M * (math.log(C) + math.log(raw))
    if log_bound > LOG_OVERFLOW:
        return raw, log_bound, math.inf, True, contributions
    return raw, log_bound, (C * raw) ** (2 * M), False, contributions


def moment_bound(A: CoefficientTensor, M: int, C: float = 1.0, cfg: AlsConfig | None = None,
                 seed: int | None = None) -> BoundReport:
    """``(C * max_s M^{s/2} alpha_s)^{2M}``; stored in log form when it overflows."""
    res = _alpha_values(alphas(A, cfg))
    raw, logb, bound, logdom, contrib = moment_bound_from_alphas([a.value for a in res], M, C)
    return BoundReport(M, res, raw, logb, bound, logdom, C, A.dims, seed, contributions=contrib)


def tail_bound_from_alphas(values: Sequence[float], x: float, C: float = 1.0) -> float:
    """``min(1, C exp(-(1/C) min_s (x/alpha_s)^{2/s}))``, skipping ``alpha_s = 0``."""
    if not x > 0:
        raise ValidationError("x must be positive")
    if not C > 0:
        raise ValidationError("C must be positive")
    # log form keeps (x/a)^{2/s} finite-or-inf for tiny alphas instead of raising
    logs = [(2 / s) * (math.log(x) - math.log(a)) for s, a in enumerate(values, start=1) if a > 0]
    if not logs:
        return 0.0
    m = min(logs)
    expo = math.inf if m > LOG_OVERFLOW else math.exp(m)
    return min(1.0, C * math.exp(-expo / C))


def tail_bound(A: CoefficientTensor, x: float, C: float = 1.0, cfg: AlsConfig | None = None) -> float:
    return tail_bound_from_alphas([r.value for r in alphas(A, cfg)], x, C)


def bound_report(A: CoefficientTensor, M: int, C: float = 1.0, x: float | None = None,
                 cfg: AlsConfig | None = None, seed: int | None = None) -> BoundReport:
    """Moment bound plus, when ``x`` is given, the tail bound from the same alphas."""
    rep = moment_bound(A, M, C, cfg, seed)
    if x is not None:
        rep.tail_x = float(x)
        rep.tail_bound = tail_bound_from_alphas([a.value for a in rep.alphas], x, C)
    return rep


def contracted_moment_prediction(A: CoefficientTensor, u, I, t: float, M: int,
                             cfg: AlsConfig | None = None) -> float:
    """Predicted upper bound on ``E |A contracted with (tG on I, u elsewhere)|``.

    For ``|I| >= 2`` this is ``t^{|I|} M^{-(d-|I|-1)/2}`` (valid for tensors
    normalised on ``s <= d-1``); for ``I = {k}`` it is
    ``t * min_{j != k} alpha~_{j,k}(u_j)``.
    """
    d = A.order
    I = sorted(set(int(j) for j in I))
    if not I:
        raise ValidationError("I must be nonempty")
    if any(not 1 <= j <= d - 1 for j in I):
        raise ValidationError(f"I={I} must be a subset of {{1..{d - 1}}}")
    if len(I) >= 2:
        return t ** len(I) * M ** (-(d - len(I) - 1) / 2)
    k = I[0]
    others = [j for j in range(1, d) if j != k]
    if not others:
        raise ValidationError("the single-slot prediction needs d >= 3")
    return t * min(alpha_tilde_jk(A, j, k, u[j - 1], cfg).value for j in others)


# -- fitting the constant ---------------------------------------------------

def fit_c_moments(data: Sequence[tuple[Sequence[float], int, float]]) -> float:
    """Smallest ``C`` with ``(C raw_factor)^{2M} >= measured`` on every ``(alphas, M, measured)``."""
    best = 0.0
    for values, M, measured in data:
        raw = max(M ** (s / 2) * a for s, a in enumerate(values, start=1))
        if measured <= 0:
            continue
        if raw == 0:
            return math.inf
        best = max(best, measured ** (1 / (2 * M)) / raw)
    return best


def fit_c_tail(data: Sequence[tuple[Sequence[float], float, float]], hi: float = 1e6,
               rel_tol: float = 1e-12) -> float:
    """Smallest ``C >= 1`` whose tail bound covers every ``(alphas, x, frequency)``.

    The unclamped bound ``C exp(-m/C)`` increases with ``C``, so each data
    point has a threshold found by bisection; the answer is the largest.
    """
    best = 1.0
    for values, x, freq in data:
        if freq <= 0:
            continue
        if tail_bound_from_alphas(values, x, best) >= freq:
            continue
        lo, top = best, hi
        if tail_bound_from_alphas(values, x, top) < freq:
            return math.inf
        while top - lo > rel_tol * top:
            mid = 0.5 * (lo + top)
            if tail_bound_from_alphas(values, x, mid) >= freq:
                top = mid
            else:
                lo = mid
        best = top
    return best


def implied_alpha_tilde_constant(estimate: float, M: int, d: int) -> float:
    """``C`` such that ``E alpha~_{j,k}(G_j) = C / M^{(d-3)/2}``, given an estimate of the left side."""
    return estimate * M ** ((d - 3) / 2)


def expected_alpha_tilde_study(A: CoefficientTensor, j: int, k: int, M: int, count: int, seed: int,
                               cfg: AlsConfig | None = None):
    """MC estimate of ``E alpha~_{j,k}(G_j)`` and the constant it implies.  Reported, never asserted."""
    if count < 1:
        raise ValidationError("count must be >= 1")
    vals = np.empty(count)
    for start, n in rng.chunks(count):
        G = rng.normals(seed, (rng.W_SLOT, 100 + j), start, n, A.dims[j - 1])
        for i in range(n):
            vals[start + i] = alpha_tilde_jk(A, j, k, G[i], cfg).value
    study = oracle.mean_study(vals, seed=seed, statistic="alpha_tilde_mean", param=M)
    study.extra["implied_C"] = implied_alpha_tilde_constant(study.estimate, M, A.order)
    return study
