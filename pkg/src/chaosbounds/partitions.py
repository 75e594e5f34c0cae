"""Set partitions of finite index sets.

Partitions are enumerated through restricted-growth strings: a string
``a_0 a_1 ... a_{n-1}`` with ``a_0 = 0`` and ``a_i <= 1 + max(a_0..a_{i-1})``
assigns element ``i`` of the (sorted) ground set to block ``a_i``.  Because
blocks are numbered in order of first appearance, the resulting blocks are
automatically sorted by their least element, i.e. already canonical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import CapacityError, ValidationError

MAX_ENUMERATION_SIZE = 12


@dataclass(frozen=True)
class SetPartition:
    """A partition of a finite set of positive integers, in canonical form.

    ``ground`` is sorted ascending; every block is sorted ascending and the
    blocks are ordered by their least element.
    """

    ground: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        check_partition(self.ground, self.blocks)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], ground: Iterable[int] | None = None) -> "SetPartition":
        """Build a canonical partition from blocks in any order."""
        bl = [tuple(sorted(int(x) for x in b)) for b in blocks]
        bl.sort(key=lambda b: b[0] if b else 0)
        if ground is None:
            g = tuple(sorted(x for b in bl for x in b))
        else:
            g = tuple(sorted(int(x) for x in ground))
        return cls(g, tuple(bl))

    @classmethod
    def parse(cls, text: str) -> "SetPartition":
        """Parse the text form ``{1,3|2}``."""
        s = text.strip()
        if not (s.startswith("{") and s.endswith("}")):
            raise ValidationError(f"partition text must look like '{{1,3|2}}', got {text!r}")
        body = s[1:-1].strip()
        if not body:
            raise ValidationError("empty partition text")
        blocks = []
        for part in body.split("|"):
            items = [p for p in re.split(r"[,\s]+", part.strip()) if p]
            if not items:
                raise ValidationError(f"empty block in {text!r}")
            try:
                blocks.append([int(p) for p in items])
            except ValueError as exc:
                raise ValidationError(f"non-integer element in {text!r}") from exc
        return cls.from_blocks(blocks)

    def __len__(self) -> int:
        return len(self.blocks)

    def __str__(self) -> str:
        return "{" + "|".join(",".join(str(x) for x in b) for b in self.blocks) + "}"

    def refines(self, other: "SetPartition") -> bool:
        """True if every block of ``self`` lies inside some block of ``other``."""
        if self.ground != other.ground:
            return False
        owner = {x: i for i, b in enumerate(other.blocks) for x in b}
        return all(len({owner[x] for x in b}) == 1 for b in self.blocks)

    def relabel(self, mapping: Mapping[int, int]) -> "SetPartition":
        return SetPartition.from_blocks(([mapping[x] for x in b] for b in self.blocks),
                                        ground=[mapping[x] for x in self.ground])

    def to_unit_range(self) -> "SetPartition":
        """Monotone relabelling of the ground set onto ``{1, ..., |ground|}``."""
        return self.relabel({x: i + 1 for i, x in enumerate(self.ground)})


def check_partition(ground: Sequence[int], blocks: Sequence[Sequence[int]]) -> None:
    """Raise ``ValidationError`` unless ``blocks`` is a canonical partition of ``ground``."""
    ground = tuple(ground)
    if not ground:
        raise ValidationError("ground set must be nonempty")
    if any((not isinstance(x, int)) or x < 1 for x in ground):
        raise ValidationError("ground set must consist of positive integers")
    if list(ground) != sorted(set(ground)):
        raise ValidationError("ground set must be sorted and duplicate-free")
    seen: list[int] = []
    for b in blocks:
        if not b:
            raise ValidationError("blocks must be nonempty")
        if list(b) != sorted(set(b)):
            raise ValidationError(f"block {b} must be sorted and duplicate-free")
        seen.extend(b)
    if sorted(seen) != list(ground) or len(seen) != len(set(seen)):
        raise ValidationError(f"blocks {blocks} do not partition {ground}")
    firsts = [b[0] for b in blocks]
    if firsts != sorted(firsts):
        raise ValidationError("blocks must be ordered by least element")


def _ground(K: Iterable[int]) -> tuple[int, ...]:
    g = tuple(sorted(set(int(x) for x in K)))
    if not g:
        raise ValidationError("index set must be nonempty")
    if g[0] < 1:
        raise ValidationError("index set must contain positive integers")
    if len(g) > MAX_ENUMERATION_SIZE:
        raise CapacityError(
            f"|K|={len(g)} exceeds the enumeration guard {MAX_ENUMERATION_SIZE} "
            f"(Bell number too large)")
    return g


def _rgs(n: int, min_blocks: int = 1, max_blocks: int | None = None) -> Iterator[list[int]]:
    """Restricted-growth strings of length n whose block count lies in range."""
    max_blocks = n if max_blocks is None else max_blocks
    a = [0] * n

    def rec(i: int, m: int) -> Iterator[list[int]]:
        # m = number of blocks used so far
        if i == n:
            if m >= min_blocks:
                yield a
            return
        if m + (n - i) < min_blocks:
            return
        for v in range(min(m + 1, max_blocks)):
            a[i] = v
            yield from rec(i + 1, max(m, v + 1))

    yield from rec(1, 1) if n > 0 else iter(())


def _from_rgs(g: tuple[int, ...], rgs: Sequence[int]) -> SetPartition:
    blocks: list[list[int]] = []
    for x, b in zip(g, rgs):
        if b == len(blocks):
            blocks.append([])
        blocks[b].append(x)
    return SetPartition(g, tuple(tuple(b) for b in blocks))


def enumerate_partitions(K: Iterable[int]) -> list[SetPartition]:
    """All partitions of ``K`` in restricted-growth (lexicographic RGS) order."""
    g = _ground(K)
    return [_from_rgs(g, r) for r in _rgs(len(g))]


def partitions_of_size(K: Iterable[int], s: int) -> list[SetPartition]:
    """Partitions of ``K`` with exactly ``s`` blocks, same order as ``enumerate_partitions``."""
    g = _ground(K)
    if not 1 <= s <= len(g):
        raise ValidationError(f"s={s} must lie in [1, {len(g)}]")
    return [_from_rgs(g, r) for r in _rgs(len(g), min_blocks=s, max_blocks=s)]


def partition_jk(d: int, j: int, k: int) -> SetPartition:
    """``{{k,d}} ∪ {{l}}`` over ``{1..d} \\ {j}``, with ``l`` ranging over ``{1..d-1} \\ {j,k}``."""
    if d < 3:
        raise ValidationError("partition_jk needs d >= 3")
    if not (1 <= j <= d - 1 and 1 <= k <= d - 1) or j == k:
        raise ValidationError(f"need distinct j,k in [1, {d - 1}], got j={j}, k={k}")
    rest = [[l] for l in range(1, d) if l not in (j, k)]
    return SetPartition.from_blocks([[k, d], *rest])


def partition_Ik(d: int, I: Iterable[int], k: int) -> SetPartition:
    """``{{k,d}} ∪ {{l}}`` over ``{1..d} \\ I``, with ``l`` in ``{1..d-1} \\ (I ∪ {k})``."""
    I = _slot_set(I, d)
    if not 1 <= k <= d - 1:
        raise ValidationError(f"k={k} must lie in [1, {d - 1}]")
    if k in I:
        raise ValidationError(f"k={k} must not belong to I={sorted(I)}")
    rest = [[l] for l in range(1, d) if l not in I and l != k]
    return SetPartition.from_blocks([[k, d], *rest])


def partition_PI(d: int, I: Iterable[int]) -> SetPartition:
    """``{I ∪ {d}} ∪ {{j} : j ∉ I, j < d}`` over ``{1..d}``."""
    I = _slot_set(I, d)
    if not I:
        raise ValidationError("I must be nonempty")
    rest = [[j] for j in range(1, d) if j not in I]
    return SetPartition.from_blocks([[*sorted(I), d], *rest])


def _slot_set(I: Iterable[int], d: int) -> frozenset[int]:
    I = frozenset(int(x) for x in I)
    if any(not 1 <= x <= d - 1 for x in I):
        raise ValidationError(f"I={sorted(I)} must be a subset of {{1..{d - 1}}}")
    return I


def bell_number(n: int) -> int:
    """Bell numbers via the Bell triangle (used by tests and guards)."""
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]
