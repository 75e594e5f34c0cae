"""Dense coefficient tensors and the contractions built on them.

Slots are numbered 1..d as in the multilinear-form notation; storage is a
row-major numpy array with axis ``j-1`` holding slot ``j``.  After a slot is
contracted away, the surviving slots keep their original relative order.

Grouping a tensor by a partition flattens each block into one axis.  Inside
a block the slots are taken in ascending order and the multi-index is
flattened lexicographically (first slot most significant), which is exactly
numpy's row-major ``reshape`` after moving the block's axes together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import CapacityError, ValidationError
from .partitions import SetPartition

DEFAULT_ENTRY_CAP = 10**7

VectorTuple = tuple[np.ndarray, ...]
SparseEntries = Union[Mapping[tuple[int, ...], float], Iterable[tuple[Sequence[int], float]]]


def scaled_norm(x: np.ndarray) -> float:
    """Euclidean norm of all entries, computed on ``x / max|x|`` so tiny entries do not underflow."""
    m = float(np.max(np.abs(x))) if x.size else 0.0
    if m == 0.0:
        return 0.0
    return m * float(np.sqrt(np.sum((x / m) ** 2)))


@dataclass(frozen=True, eq=False)
class CoefficientTensor:
    """Immutable dense array ``a(i_1, ..., i_d)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float, copy=True)
        if arr.ndim < 1:
            raise ValidationError("a coefficient tensor needs order >= 1")
        if any(n < 1 for n in arr.shape):
            raise ValidationError(f"all dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("coefficients must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.coeffs.shape

    @property
    def order(self) -> int:
        return self.coeffs.ndim

    def frobenius(self) -> float:
        return scaled_norm(self.coeffs)

    def scaled(self, c: float) -> "CoefficientTensor":
        return CoefficientTensor(self.coeffs * c)

    def __repr__(self) -> str:
        return f"CoefficientTensor(dims={self.dims})"


@dataclass(frozen=True, eq=False)
class GroupedTensor:
    """Order-|P| view of ``base`` with one flattened axis per block of ``P``."""

    base: CoefficientTensor
    blocks: tuple[tuple[int, ...], ...]
    array: np.ndarray

    @property
    def grouped_dims(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def order(self) -> int:
        return self.array.ndim


def new_tensor(dims: Sequence[int], entries=None, *, base: int = 1,
               cap: int = DEFAULT_ENTRY_CAP) -> CoefficientTensor:
    """Validate and build a tensor from a dense array or sparse entries.

    ``entries`` may be a dense array (anything numpy reshapes to ``dims``,
    flat row-major or already shaped), a mapping ``multi-index -> value``, or
    an iterable of ``(multi-index, value)`` pairs.  Sparse indices are
    ``base``-based (1 by default) and duplicates are summed.
    """
    dims = tuple(int(n) for n in dims)
    if not dims:
        raise ValidationError("dims must be nonempty")
    if any(n < 1 for n in dims):
        raise ValidationError(f"dims must be positive, got {dims}")
    size = math.prod(dims)
    if size > cap:
        raise CapacityError(f"tensor with {size} entries exceeds the cap of {cap}")
    if entries is None:
        return CoefficientTensor(np.zeros(dims))
    if isinstance(entries, np.ndarray) or (
            isinstance(entries, (list, tuple)) and not _looks_sparse(entries)):
        arr = np.asarray(entries, dtype=float)
        if arr.size != size:
            raise ValidationError(f"dense data has {arr.size} entries, dims need {size}")
        return CoefficientTensor(arr.reshape(dims))
    items = entries.items() if isinstance(entries, Mapping) else entries
    arr = np.zeros(dims)
    for idx, value in items:
        idx = tuple(int(i) - base for i in idx)
        if len(idx) != len(dims) or any(not 0 <= i < n for i, n in zip(idx, dims)):
            raise ValidationError(f"index {tuple(i + base for i in idx)} out of range for dims {dims}")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(f"non-finite value at {tuple(i + base for i in idx)}")
        arr[idx] += value
    return CoefficientTensor(arr)


def _looks_sparse(entries) -> bool:
    return len(entries) > 0 and all(
        isinstance(e, (list, tuple)) and len(e) == 2 and isinstance(e[0], (list, tuple))
        and np.isscalar(e[1]) for e in entries)


def as_vector_tuple(parts: Sequence, dims: Sequence[int]) -> VectorTuple:
    """Validate a tuple of vectors against a list of lengths."""
    if len(parts) != len(dims):
        raise ValidationError(f"expected {len(dims)} vectors, got {len(parts)}")
    out = []
    for j, (p, n) in enumerate(zip(parts, dims), start=1):
        v = np.asarray(p, dtype=float)
        if v.shape != (n,):
            raise ValidationError(f"vector {j} has shape {v.shape}, expected ({n},)")
        out.append(v)
    return tuple(out)


def outer(parts: Sequence[np.ndarray]) -> np.ndarray:
    """``u_1 ⊗ ... ⊗ u_k`` as a dense array."""
    out = np.asarray(parts[0], dtype=float)
    for p in parts[1:]:
        out = np.multiply.outer(out, np.asarray(p, dtype=float))
    return out


def apply_multilinear(A: CoefficientTensor, u: Sequence) -> float:
    """``sum a(i_1..i_d) u_1(i_1) ... u_d(i_d)``."""
    u = as_vector_tuple(u, A.dims)
    out = A.coeffs
    for v in reversed(u):
        out = out @ v
    return float(out)


def apply_functional(A: CoefficientTensor, v) -> float:
    """Inner product of the coefficient array with ``v``."""
    v = np.asarray(v, dtype=float)
    if v.shape != A.dims:
        raise ValidationError(f"functional argument has shape {v.shape}, expected {A.dims}")
    return float(np.sum(A.coeffs * v))


def contract_slot(A: CoefficientTensor, j: int, u_j) -> CoefficientTensor:
    """Sum slot ``j`` (1-based) against ``u_j``; returns an order d-1 tensor."""
    if A.order < 2:
        raise ValidationError("cannot contract the only slot of an order-1 tensor")
    if not 1 <= j <= A.order:
        raise ValidationError(f"slot {j} out of range 1..{A.order}")
    u_j = np.asarray(u_j, dtype=float)
    if u_j.shape != (A.dims[j - 1],):
        raise ValidationError(f"vector for slot {j} has shape {u_j.shape}, expected ({A.dims[j - 1]},)")
    return CoefficientTensor(np.tensordot(A.coeffs, u_j, axes=([j - 1], [0])))


def _slot_vectors(u, I: Iterable[int]) -> dict[int, np.ndarray]:
    if isinstance(u, Mapping):
        return {j: np.asarray(u[j], dtype=float) for j in I}
    return {j: np.asarray(u[j - 1], dtype=float) for j in I}


def contract_set(A: CoefficientTensor, I: Iterable[int], u, M: float = 1) -> CoefficientTensor:
    """``M^{|I|/2}`` times ``A`` contracted on every slot of ``I``.

    ``u`` is either a sequence indexed by slot (``u[j-1]`` is used for slot
    ``j``) or a mapping ``slot -> vector``.
    """
    d = A.order
    I = sorted(set(int(j) for j in I))
    if not 1 <= len(I) <= d - 2:
        raise ValidationError(f"|I|={len(I)} must lie in [1, {d - 2}]")
    if any(not 1 <= j <= d - 1 for j in I):
        raise ValidationError(f"I={I} must be a subset of {{1..{d - 1}}}")
    vecs = _slot_vectors(u, I)
    out = A
    for j in reversed(I):  # highest slot first keeps lower slot numbers valid
        out = contract_slot(out, j, vecs[j])
    if M != 1:
        out = out.scaled(float(M) ** (len(I) / 2))
    return out


def group_blocks(A: CoefficientTensor, P: SetPartition) -> GroupedTensor:
    """Flatten each block of ``P`` (a partition of ``{1..d}``) into one axis."""
    if P.ground != tuple(range(1, A.order + 1)):
        raise ValidationError(f"partition {P} does not partition {{1..{A.order}}}")
    perm = [j - 1 for b in P.blocks for j in b]
    shape = [math.prod(A.dims[j - 1] for j in b) for b in P.blocks]
    arr = np.ascontiguousarray(np.transpose(A.coeffs, perm)).reshape(shape)
    return GroupedTensor(A, P.blocks, arr)


def contract_batch(array: np.ndarray, vectors: Mapping[int, np.ndarray]) -> np.ndarray:
    """Contract axes of ``array`` against batches of vectors.

    ``vectors`` maps a 0-based axis to an array of shape ``(batch, n_axis)``;
    the result has shape ``(batch, *remaining axes)``.  Each draw is
    contracted independently, so this is the vectorised form of repeated
    ``contract_slot`` calls.
    """
    axes = sorted(vectors)
    if not axes:
        raise ValidationError("contract_batch needs at least one axis")
    letters = "abcdefghijklmnopqrstuvwxy"
    if array.ndim > len(letters):
        raise ValidationError("tensor order too large for batch contraction")
    src = letters[:array.ndim]
    kept = "".join(c for i, c in enumerate(src) if i not in vectors)
    # contract the highest axis first so the batch axis is introduced once
    out = np.einsum(f"{src},z{src[axes[-1]]}->z{src.replace(src[axes[-1]], '')}",
                    array, vectors[axes[-1]])
    cur = src.replace(src[axes[-1]], "")
    for ax in reversed(axes[:-1]):
        c = src[ax]
        nxt = cur.replace(c, "")
        out = np.einsum(f"z{cur},z{c}->z{nxt}", out, vectors[ax])
        cur = nxt
    assert cur == kept
    return out


# -- JSON interchange -------------------------------------------------------

def tensor_from_dict(data: Mapping, *, cap: int = DEFAULT_ENTRY_CAP) -> CoefficientTensor:
    """Parse ``{"dims": [...], "entries": [[i_1..i_d, value], ...]}`` (1-based) or ``{"dims", "dense"}``."""
    if "dims" not in data:
        raise ValidationError("tensor JSON needs a 'dims' field")
    dims = data["dims"]
    if "dense" in data:
        return new_tensor(dims, np.asarray(data["dense"], dtype=float), cap=cap)
    if "entries" in data:
        pairs = []
        for row in data["entries"]:
            if len(row) != len(dims) + 1:
                raise ValidationError(f"entry {row} must list {len(dims)} indices and a value")
            pairs.append((tuple(int(i) for i in row[:-1]), row[-1]))
        return new_tensor(dims, pairs, cap=cap)
    raise ValidationError("tensor JSON needs 'entries' or 'dense'")


def tensor_to_dict(A: CoefficientTensor, *, sparse: bool = False) -> dict:
    if not sparse:
        return {"dims": list(A.dims), "dense": A.coeffs.ravel().tolist()}
    rows = [[*(int(i) + 1 for i in idx), float(A.coeffs[idx])]
            for idx in zip(*np.nonzero(A.coeffs))]
    return {"dims": list(A.dims), "entries": rows}


def load_tensor(path, *, cap: int = DEFAULT_ENTRY_CAP) -> CoefficientTensor:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return tensor_from_dict(data, cap=cap)
