"""Gaussian small-ball checks, greedy nets and the partitioning of finite
vector-tuple sets.

Vector tuples ``u = (u_1, ..., u_{d-1})`` live in the product of the first
``d-1`` coordinate spaces of a tensor ``A`` of order ``d``; the last slot is
the one carried by the Gaussian vector.  Slot numbers are 1-based.

Pseudonorm handles are vectorised callables taking an array of shape
``(batch, n)`` and returning ``(batch,)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng
from .errors import CapacityError, PostconditionError, ValidationError
from .norms import AlsConfig, alpha_tilde_jk, chaos_vector, rho_alpha, rho_alphaIu
from .oracle import ChaosStudy, frequency_study, mean_study
from .tensor import CoefficientTensor, as_vector_tuple, contract_batch

Pseudonorm = Callable[[np.ndarray], np.ndarray]
Metric = Callable[[object, object], float]

MAX_SUBSET_SLOTS = 10
SE_MULTIPLIER = 3.0


# -- W_I and the small-ball propositions ------------------------------------

def _check_slots(I, d: int) -> list[int]:
    I = sorted(set(int(j) for j in I))
    if not I:
        raise ValidationError("I must be nonempty")
    if any(not 1 <= j <= d - 1 for j in I):
        raise ValidationError(f"I={I} must be a subset of {{1..{d - 1}}}")
    return I


def _chaos_batch(A: CoefficientTensor, parts: dict[int, np.ndarray]) -> np.ndarray:
    """Rows of ``chaos_vector`` for batches of vector tuples, ``parts[axis]`` of shape (batch, n)."""
    return contract_batch(A.coeffs, parts)


def W_I_x(A: CoefficientTensor, x, I, t: float, count: int, seed: int,
          cfg: AlsConfig | None = None) -> ChaosStudy:
    """MC estimate of ``E |chaos_vector(z)|`` with ``z_j = t G_j`` on ``I`` and ``x_j`` elsewhere.

    Slot ``j`` reads stream ``(W_SLOT, j)``; the normals do not depend on
    ``t``, so estimates at different ``t`` are paired and scale exactly.
    """
    d = A.order
    if d < 2:
        raise ValidationError("W_I_x needs order >= 2")
    x = as_vector_tuple(x, A.dims[:-1])
    I = _check_slots(I, d)
    if not t > 0:
        raise ValidationError("t must be positive")
    vals = np.empty(count)
    for start, n in rng.chunks(count):
        parts = {}
        for j in range(1, d):
            if j in I:
                parts[j - 1] = t * rng.normals(seed, (rng.W_SLOT, j), start, n, A.dims[j - 1])
            else:
                parts[j - 1] = np.broadcast_to(x[j - 1], (n, A.dims[j - 1]))
        vals[start:start + n] = np.linalg.norm(_chaos_batch(A, parts), axis=1)
    return mean_study(vals, seed=seed, statistic="W", param=t, extra={"I": I})


def euclidean_norm(y: np.ndarray) -> np.ndarray:
    return np.linalg.norm(y, axis=-1)


def linear_pseudonorm(L) -> Pseudonorm:
    """``y -> |L y|``; a pseudonorm for any matrix ``L`` (zero rows allowed)."""
    L = np.asarray(L, dtype=float)
    return lambda y: np.linalg.norm(y @ L.T, axis=-1)


def chaos_pseudonorm(A: CoefficientTensor) -> Pseudonorm:
    """The pseudonorm of an order-2 tensor: ``y -> |sum_i a(i, .) y(i)|``."""
    if A.order != 2:
        raise ValidationError("chaos_pseudonorm takes an order-2 tensor")
    return linear_pseudonorm(A.coeffs.T)


@dataclass
class SmallBallCheck:
    estimate: float
    std_error: float
    bound: float
    passed: bool
    thresholds: list[float]
    n_samples: int
    seed: int
    t: float

    def to_dict(self) -> dict:
        return {"t": self.t, "bound": self.bound, "estimate": self.estimate, "se": self.std_error,
                "pass": self.passed, "thresholds": self.thresholds,
                "n_samples": self.n_samples, "seed": self.seed}

    def csv_row(self) -> tuple:
        return (self.t, self.bound, self.estimate, self.std_error, self.passed)


def one_sided_pass(estimate: float, se: float, bound: float) -> bool:
    return estimate >= bound - SE_MULTIPLIER * se


def two_norm_small_ball_bound(t: float) -> float:
    return 0.5 * math.exp(-1.0 / (2 * t * t))


def chaos_small_ball_bound(t: float, factors: int) -> float:
    return 2.0 ** (-factors) * math.exp(-factors / (2 * t * t))


def two_norm_small_ball_check(alpha1: Pseudonorm, alpha2: Pseudonorm, x, t: float, count: int,
                 seed: int) -> SmallBallCheck:
    """Probability that ``y = tG`` has ``alpha_i(y - x) <= 4 E alpha_i(tG)`` for both i.

    The two expectations are estimated first from stream ``PROP_NORM``;
    the probability is then estimated from the independent stream ``PROP_POINT``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValidationError("x must be a vector")
    if np.linalg.norm(x) > 1 + 1e-12:
        raise ValidationError("x must lie in the unit ball")
    if not t > 0:
        raise ValidationError("t must be positive")
    n = len(x)
    sums = np.zeros(2)
    for start, b in rng.chunks(count):
        y = t * rng.normals(seed, (rng.PROP_NORM,), start, b, n)
        sums += [np.sum(alpha1(y)), np.sum(alpha2(y))]
    thr = 4 * sums / count
    hits = np.empty(count, dtype=bool)
    for start, b in rng.chunks(count):
        y = t * rng.normals(seed, (rng.PROP_POINT,), start, b, n) - x
        hits[start:start + b] = (alpha1(y) <= thr[0]) & (alpha2(y) <= thr[1])
    st = frequency_study(hits, seed=seed, statistic="two_norm_small_ball", param=t)
    bound = two_norm_small_ball_bound(t)
    return SmallBallCheck(st.estimate, st.std_error, bound,
                          one_sided_pass(st.estimate, st.std_error, bound),
                          thr.tolist(), count, seed, t)


def nonempty_subsets(k: int) -> list[tuple[int, ...]]:
    """Nonempty subsets of ``{1..k}`` ordered by size, then lexicographically."""
    return [c for r in range(1, k + 1) for c in itertools.combinations(range(1, k + 1), r)]


def chaos_small_ball_check(A: CoefficientTensor, x, t: float, count: int, seed: int,
                 cfg: AlsConfig | None = None) -> SmallBallCheck:
    """Probability that ``y = (tG_1..tG_{d-1})`` has ``rho(x, y) <= sum_I W^x_I(4t)``.

    The threshold sum runs over every nonempty ``I`` of ``{1..d-1}``; each
    term is estimated with ``count`` draws from the ``W_SLOT`` streams.
    """
    d = A.order
    k = d - 1
    if k < 1:
        raise ValidationError("chaos_small_ball_check needs order >= 2")
    if k > MAX_SUBSET_SLOTS:
        raise CapacityError(f"{2 ** k - 1} subsets exceed the guard of {MAX_SUBSET_SLOTS} slots")
    x = as_vector_tuple(x, A.dims[:-1])
    if any(np.linalg.norm(v) > 1 + 1e-12 for v in x):
        raise ValidationError("every x_j must lie in the unit ball")
    thr = [W_I_x(A, x, I, 4 * t, count, seed, cfg).estimate for I in nonempty_subsets(k)]
    total = math.fsum(thr)
    cx = chaos_vector(A, x)
    hits = np.empty(count, dtype=bool)
    for start, b in rng.chunks(count):
        parts = {j - 1: t * rng.normals(seed, (rng.PROP_POINT, j), start, b, A.dims[j - 1])
                 for j in range(1, d)}
        dist = np.linalg.norm(_chaos_batch(A, parts) - cx, axis=1)
        hits[start:start + b] = dist <= total
    st = frequency_study(hits, seed=seed, statistic="chaos_small_ball", param=t)
    bound = chaos_small_ball_bound(t, k)
    return SmallBallCheck(st.estimate, st.std_error, bound,
                          one_sided_pass(st.estimate, st.std_error, bound),
                          thr, count, seed, t)


def identity_embedding(n: int, factors: int = 2) -> CoefficientTensor:
    """Order ``factors+1`` tensor whose pseudonorm is the Euclidean norm on the tensor product.

    ``a(i_1..i_k, m) = 1`` iff ``m`` is the row-major position of ``(i_1..i_k)``.
    """
    size = n ** factors
    return CoefficientTensor(np.eye(size).reshape((n,) * factors + (size,)))


# -- greedy nets ------------------------------------------------------------

@dataclass
class NetResult:
    centers: list
    center_indices: list[int]
    assignment: list[int]
    radius_2u: float
    covered_count: int
    packing_ok: bool
    covering_ok: bool

    @property
    def cardinality(self) -> int:
        return len(self.centers)

    def to_dict(self) -> dict:
        return {"center_indices": self.center_indices, "assignment": self.assignment,
                "radius_2u": self.radius_2u, "covered_count": self.covered_count,
                "packing_ok": self.packing_ok, "covering_ok": self.covering_ok,
                "cardinality": self.cardinality}


def greedy_net(points: Sequence, metric: Metric, two_u: float) -> NetResult:
    """First-fit net: a point becomes a center iff it is farther than ``two_u`` from every center.

    Points are scanned in the given order; each non-center is assigned to
    the first center within ``two_u``.  Both certificates are then
    recomputed by brute force over all pairs.
    """
    if len(points) == 0:
        raise ValidationError("greedy_net needs at least one point")
    if not two_u >= 0:
        raise ValidationError("two_u must be nonnegative")
    centers: list[int] = []
    assignment: list[int] = []
    for i, p in enumerate(points):
        owner = next((c for c in centers if metric(p, points[c]) <= two_u), None)
        if owner is None:
            centers.append(i)
            owner = i
        assignment.append(owner)
    packing_ok = all(metric(points[a], points[b]) > two_u
                     for a, b in itertools.combinations(centers, 2))
    covered = sum(1 for p in points if any(metric(p, points[c]) <= two_u for c in centers))
    return NetResult([points[c] for c in centers], centers, assignment, float(two_u),
                     covered, packing_ok, covered == len(points))


# -- the classes U(r, N) ----------------------------------------------------

@dataclass(frozen=True)
class UClassParams:
    M: int
    N: int
    r: int
    d: int

    def __post_init__(self):
        if self.M < 1 or self.N < 0 or self.r < 1 or self.d < 3:
            raise ValidationError(f"invalid class parameters {self}")

    @property
    def alpha_threshold(self) -> float:
        return 2.0 ** (-self.N) * self.M ** (-(self.d - 2) / 2)

    @property
    def rho_threshold(self) -> float:
        return 2.0 ** (-2 * self.N) * self.M ** (-(self.d - 1) / 2)

    def rho_I_threshold(self, size: int) -> float:
        """Bound on the contracted-tensor distance for ``|I| = size``."""
        return 2.0 ** (-2 * self.N) * self.M ** (-(self.d - size - 1) / 2)

    def advanced(self, steps: int = 2) -> "UClassParams":
        return UClassParams(self.M, self.N + steps, self.r, self.d)


@dataclass(frozen=True)
class Violation:
    clause: str
    indices: tuple
    margin: float

    def to_dict(self) -> dict:
        return {"clause": self.clause, "indices": list(self.indices), "margin": self.margin}


def random_half_ball_set(dims, count: int, seed: int) -> list[list[np.ndarray]]:
    """``count`` tuples with each part uniform in the ball of radius 1/2."""
    U = []
    for t in range(count):
        parts = []
        for j, n in enumerate(dims, start=1):
            g = rng.normals(seed, (rng.POINTS, j), t, 1, n)[0]
            r = rng.uniforms(seed, (rng.POINTS, 100 + j), t, 1, 1)[0, 0] ** (1 / n)
            nrm = np.linalg.norm(g)
            parts.append(0.5 * r * g / nrm if nrm > 0 else np.zeros(n))
        U.append(parts)
    return U


def _pairs(j_max: int):
    return [(j, k) for j in range(1, j_max + 1) for k in range(1, j_max + 1) if j != k]


def check_U_membership(A: CoefficientTensor, params: UClassParams, U: Sequence,
                       cfg: AlsConfig | None = None, slack: float = 1e-12):
    """Evaluate every clause of the class definition; returns ``(ok, violations)``.

    ``margin`` is threshold minus value (negative for a violation).  A
    clause passes when ``value <= threshold + slack``.
    """
    d = A.order
    if d != params.d:
        raise ValidationError(f"params are for order {params.d}, tensor has order {d}")
    U = [as_vector_tuple(u, A.dims[:-1]) for u in U]
    out: list[Violation] = []
    if not 1 <= len(U) <= params.r:
        out.append(Violation("cardinality", (len(U),), float(params.r - len(U))))
    ta, tr = params.alpha_threshold, params.rho_threshold
    for t, u in enumerate(U):
        for j, k in _pairs(d - 1):
            v = alpha_tilde_jk(A, j, k, u[j - 1], cfg).value
            if v > ta + slack:
                out.append(Violation("alpha_tilde", (t, j, k), ta - v))
        for j, uj in enumerate(u, start=1):
            nv = float(np.linalg.norm(uj))
            if nv > 1 + slack:
                out.append(Violation("ball", (t, j), 1 - nv))
    for t, s in itertools.combinations(range(len(U)), 2):
        r = rho_alpha(A, U[t], U[s])
        if r > tr + slack:
            out.append(Violation("rho", (t, s), tr - r))
        for j in range(1, d):
            nv = float(np.linalg.norm(U[t][j - 1] - U[s][j - 1]))
            if nv > 1 + slack:
                out.append(Violation("difference_ball", (t, s, j), 1 - nv))
    return not out, out


def contracted_rho_violations(A: CoefficientTensor, params: UClassParams, shift, part: Sequence,
                              slack: float = 1e-12) -> list[Violation]:
    """Pairs of ``part`` breaking the contracted-distance clause for some ``1 <= |I| <= d-2``."""
    d = A.order
    out = []
    for I in contracted_slot_sets(d):
        thr = params.rho_I_threshold(len(I))
        for t, s in itertools.combinations(range(len(part)), 2):
            v = rho_alphaIu(A, shift, I, params.M, part[t], part[s])
            if v > thr + slack:
                out.append(Violation("rho_I", (I, t, s), thr - v))
    return out


def contracted_slot_sets(d: int) -> list[tuple[int, ...]]:
    return [I for I in nonempty_subsets(d - 1) if len(I) <= d - 2]


@dataclass
class PartitionPart:
    shift_index: int
    shift: tuple
    member_indices: list[int]
    shifted: list[tuple]

    def to_dict(self) -> dict:
        return {"shift_index": self.shift_index, "shift": [v.tolist() for v in self.shift],
                "member_indices": self.member_indices}


@dataclass
class PartitionReport:
    parts: list[PartitionPart]
    order: list[int]
    params: UClassParams
    radii: dict
    proof_t: float
    log2_cardinality_budget: float
    seed: int | None = None
    checks: dict = field(default_factory=dict)

    @property
    def cardinality(self) -> int:
        return len(self.parts)

    def to_dict(self) -> dict:
        return {"M": self.params.M, "N": self.params.N, "r": self.params.r, "d": self.params.d,
                "seed": self.seed, "cardinality": self.cardinality,
                "log2_cardinality_budget": self.log2_cardinality_budget,
                "proof_t": self.proof_t, "radii": self.radii, "checks": self.checks,
                "parts": [p.to_dict() for p in self.parts]}


def _refine(cells: list[list[int]], key_of: Callable[[list[int]], list]) -> list[list[int]]:
    out = []
    for cell in cells:
        labels = key_of(cell)
        groups: dict = {}
        for i, lab in zip(cell, labels):
            groups.setdefault(lab, []).append(i)
        out.extend(groups.values())
    return out


def _net_labels(points: list, metric: Metric, two_u: float) -> list[int]:
    return greedy_net(points, metric, two_u).assignment


def partition_U(A: CoefficientTensor, params: UClassParams, U: Sequence,
                cfg: AlsConfig | None = None, seed: int | None = None, c: float = 0.25,
                C_card: float = 1.0) -> PartitionReport:
    """Split ``U`` into shifted parts that belong to the class at level ``N + 2``.

    1. ``U`` is sorted lexicographically.
    2. Cells are refined by a greedy net in each pseudometric
       ``alpha~_{j,k}(x_j - y_j)``.  The first element of each resulting
       cell becomes the shift of every part carved out of it.
    3. Cells are refined by a net in ``rho`` on the shifted elements.
    4. Cells are refined by a net in the contracted distance for every
       ``I`` with ``1 <= |I| <= d-2``, using the cell's shift.

    Net radius is half of the target diameter, so by the triangle inequality
    every pair inside a final cell meets its threshold.  All postconditions
    are re-checked and a ``PostconditionError`` names the first failing clause.
    """
    d = A.order
    ok, bad = check_U_membership(A, params, U, cfg)
    if not ok:
        raise ValidationError(f"U is not in the class: {[v.to_dict() for v in bad[:5]]}")
    U = [as_vector_tuple(u, A.dims[:-1]) for u in U]
    order = sorted(range(len(U)), key=lambda i: tuple(np.concatenate(U[i]).tolist()))
    nxt = params.advanced(2)
    radii = {"alpha_tilde": nxt.alpha_threshold / 2, "rho": nxt.rho_threshold / 2,
             "rho_I": {len(I): params.rho_I_threshold(len(I)) / 2 for I in contracted_slot_sets(d)}}

    cells = [order]
    for j, k in _pairs(d - 1):
        def alpha_metric(p, q, j=j, k=k):
            return alpha_tilde_jk(A, j, k, U[p][j - 1] - U[q][j - 1], cfg).value
        cells = _refine(cells, lambda cell, m=alpha_metric: _net_labels(cell, m, radii["alpha_tilde"]))
    shift_of = {i: cell[0] for cell in cells for i in cell}

    def shifted(i):
        s = U[shift_of[i]]
        return tuple(a - b for a, b in zip(U[i], s))

    def rho_metric(p, q):
        return rho_alpha(A, shifted(p), shifted(q))
    cells = _refine(cells, lambda cell: _net_labels(cell, rho_metric, radii["rho"]))
    for I in contracted_slot_sets(d):
        def rho_I_metric(p, q, I=I):
            return rho_alphaIu(A, U[shift_of[p]], I, params.M, shifted(p), shifted(q))
        cells = _refine(cells, lambda cell, m=rho_I_metric: _net_labels(cell, m, radii["rho_I"][len(I)]))

    parts = [PartitionPart(shift_of[cell[0]], U[shift_of[cell[0]]], list(cell),
                           [shifted(i) for i in cell]) for cell in cells]
    report = PartitionReport(parts, order, params, radii,
                             proof_t=c * 2.0 ** (-params.N) * params.M ** -0.5,
                             log2_cardinality_budget=C_card * params.M * 2.0 ** (2 * params.N),
                             seed=seed)
    _check_partition_post(A, params, U, report, cfg)
    return report


def _check_partition_post(A, params, U, report: PartitionReport, cfg) -> None:
    members = sorted(i for p in report.parts for i in p.member_indices)
    if members != list(range(len(U))):
        raise PostconditionError("union", {"members": members})
    nxt = params.advanced(2)
    for n, part in enumerate(report.parts):
        ok, bad = check_U_membership(A, nxt, part.shifted, cfg)
        if not ok:
            raise PostconditionError(bad[0].clause, {"part": n, **bad[0].to_dict()})
        bad = contracted_rho_violations(A, params, part.shift, part.shifted)
        if bad:
            raise PostconditionError("rho_I", {"part": n, **bad[0].to_dict()})
    report.checks = {"union_disjoint": True, "membership_next_level": True, "rho_I": True,
                     "cardinality": report.cardinality,
                     "log2_cardinality": math.log2(report.cardinality),
                     "within_budget": math.log2(report.cardinality) <= report.log2_cardinality_budget}


# -- the order-2 sup over U_N ------------------------------------------------

def sup_over_UN_d2(A: CoefficientTensor, g: np.ndarray, M: int, N: int = 0):
    """``sup <u, A g>`` over ``|u| <= 1``, ``|A^T u| <= 2^{-N} M^{-1/2}``.

    Returns ``(upper, lower)``.  For each ``theta`` in [0, 1] the convex
    combination of the two constraints is one ellipsoid whose linear maximum
    is closed form (the upper bound); strong duality makes the minimum over
    ``theta`` exact.  Scaling that ellipsoid's maximiser back into the
    feasible set gives the lower bound.
    """
    if A.order != 2:
        raise ValidationError("sup_over_UN_d2 needs an order-2 tensor")
    X = A.coeffs
    rho = 2.0 ** (-N) * M ** -0.5
    s2, V = np.linalg.eigh(X @ X.T)
    s2 = np.clip(s2, 0.0, None)
    w = V.T @ (X @ np.asarray(g, dtype=float))
    if not np.any(w):
        return 0.0, 0.0
    live = s2 > 1e-14 * max(s2.max(), 1e-300)

    def upper(theta):
        den = (1 - theta) + theta * s2[live]
        return math.sqrt(((1 - theta) + theta * rho * rho) * float(np.sum(w[live] ** 2 / den)))

    grid = np.linspace(0.0, 1.0, 65)[:-1]
    vals = [upper(th) for th in grid]
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[i + 1] if i + 1 < len(grid) else 1.0 - 1e-12
    res = minimize_scalar(upper, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    theta = float(res.x) if res.fun < vals[i] else float(grid[i])
    ub = min(res.fun, vals[i])
    den = (1 - theta) + theta * s2
    z = np.where(live, w / np.where(live, den, 1.0), 0.0)
    u = V @ z
    scale = max(np.linalg.norm(u), np.linalg.norm(X.T @ u) / rho)
    lb = float(u @ (X @ g) / scale) if scale > 0 else 0.0
    return float(ub), max(lb, 0.0)


@dataclass
class SupMomentCheck:
    estimate: float
    std_error: float
    bound: float
    passed: bool
    max_gap: float
    n_samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "se": self.std_error, "bound": self.bound,
                "pass": self.passed, "max_duality_gap": self.max_gap,
                "n_samples": self.n_samples, "seed": self.seed}


def sup_second_moment_d2_check(A: CoefficientTensor, M: int, count: int, seed: int, N: int = 0,
                             C: float = 2.0, A_exp: int = 1) -> SupMomentCheck:
    """Second moment of the sup over ``U_N`` against ``(C 2^{A})^2``.

    A desk-scale check at exponent 2; needs ``|A|_F <= 1``.  Passes when the
    upper end (estimate plus 3 SE) of the upper-bound estimate stays below.
    """
    if A.frobenius() > 1 + 1e-12:
        raise ValidationError("the check needs Frobenius norm <= 1")
    ups = np.empty(count)
    gap = 0.0
    for start, n in rng.chunks(count):
        G = rng.normals(seed, (rng.Z_SUP,), start, n, A.dims[1])
        for i in range(n):
            ub, lb = sup_over_UN_d2(A, G[i], M, N)
            ups[start + i] = ub
            gap = max(gap, ub - lb)
    st = mean_study(ups ** 2, seed=seed, statistic="sup_UN_second_moment", param=M)
    bound = (C * 2.0 ** A_exp) ** 2
    return SupMomentCheck(st.estimate, st.std_error, bound,
                               st.estimate + SE_MULTIPLIER * st.std_error <= bound,
                               gap, count, seed)
