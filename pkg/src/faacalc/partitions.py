"""Set partitions, ordered partitions with empty blocks, and nested partitions.

All enumerators are lazy generators with a fixed, documented order so that
their output can be snapshot-tested.  Indices are 1-based throughout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from faacalc.errors import InputError

__all__ = [
    "SetPartition",
    "OrderedPartition",
    "NestedPartition",
    "enumerate_partitions",
    "enumerate_ordered_partitions",
    "enumerate_nested_partitions",
    "restricted_growth_strings",
]


@dataclass(frozen=True)
class SetPartition:
    """Partition of ``{1..ground_size}`` into non-empty blocks.

    Blocks are sorted internally and ordered by their minimal element.
    """

    ground_size: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        seen = sorted(i for b in self.blocks for i in b)
        if seen != list(range(1, self.ground_size + 1)):
            raise InputError(f"blocks {self.blocks} do not partition 1..{self.ground_size}")
        if any(len(b) == 0 for b in self.blocks):
            raise InputError("set partition blocks must be non-empty")

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]]) -> "SetPartition":
        """Build the canonical form from arbitrary blocks."""
        bl = sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0])
        return cls(sum(len(b) for b in bl), tuple(bl))

    @property
    def k(self) -> int:
        return len(self.blocks)

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def to_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    def __str__(self):
        return "|".join("".join(map(str, b)) if self.ground_size < 10
                        else ",".join(map(str, b)) for b in self.blocks)


@dataclass(frozen=True)
class OrderedPartition:
    """Position-significant split of ``{1..ground_size}`` into ``d+1`` blocks.

    Blocks may be empty; ``blocks[0]`` plays a distinguished role in the
    pullback formula.
    """

    ground_size: int
    blocks: tuple[tuple[int, ...], ...]

    @property
    def d(self) -> int:
        return len(self.blocks) - 1

    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def to_list(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class NestedPartition:
    """A hierarchy of partitions of depth ``level`` over ``leaves``.

    A level-0 nesting is the bare (sorted) index set with no children.  A
    level-(l+1) nesting has one child per block of a set partition of its
    leaves, each child being a level-l nesting of that block.  Children are
    ordered by their minimal leaf.
    """

    level: int
    leaves: tuple[int, ...]
    children: tuple["NestedPartition", ...] = ()

    def top(self) -> SetPartition | None:
        """The top-level set partition (None at level 0)."""
        if self.level == 0:
            return None
        return SetPartition.from_blocks([c.leaves for c in self.children])

    def shape(self):
        """Size signature: an int at level 0, a tuple of child shapes otherwise."""
        if self.level == 0:
            return len(self.leaves)
        return tuple(c.shape() for c in self.children)

    def to_list(self):
        if self.level == 0:
            return list(self.leaves)
        return [c.to_list() for c in self.children]


def restricted_growth_strings(m: int, k: int | None = None) -> Iterator[tuple[int, ...]]:
    """Yield restricted-growth strings ``a`` of length ``m`` in lexicographic order.

    ``a[0] = 0`` and ``a[i] <= 1 + max(a[:i])``.  With ``k`` given, only
    strings using exactly ``k`` distinct values are produced.
    """
    if m == 0:
        if k in (None, 0):
            yield ()
        return
    if k is not None and not 1 <= k <= m:
        return
    a = [0] * m

    def rec(i: int, top: int):
        # top = number of blocks opened so far
        if i == m:
            if k is None or top == k:
                yield tuple(a)
            return
        hi = top + 1 if (k is None or top < k) else top
        for v in range(hi):
            # prune: not enough positions left to open the remaining blocks
            if k is not None and k - max(top, v + 1) > m - i - 1:
                continue
            a[i] = v
            yield from rec(i + 1, max(top, v + 1))

    a[0] = 0
    yield from rec(1, 1)


def _blocks_from_rgs(rgs: Sequence[int], ground: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    nb = max(rgs) + 1 if rgs else 0
    out: list[list[int]] = [[] for _ in range(nb)]
    for g, v in zip(ground, rgs):
        out[v].append(g)
    return tuple(tuple(b) for b in out)


def _check_nonneg(name, v, low=0):
    if not isinstance(v, int) or isinstance(v, bool) or v < low:
        raise InputError(f"{name} must be an integer >= {low}, got {v!r}")


def enumerate_partitions(m: int, k: int | None = None) -> Iterator[SetPartition]:
    """Yield the set partitions of ``{1..m}`` (with exactly ``k`` blocks if given).

    Order is lexicographic in the restricted-growth string.

    Examples
    --------
    >>> [str(p) for p in enumerate_partitions(3, 2)]
    ['12|3', '13|2', '1|23']
    >>> sum(1 for _ in enumerate_partitions(4))
    15
    """
    _check_nonneg("m", m)
    if k is not None:
        _check_nonneg("k", k)
    ground = range(1, m + 1)
    for rgs in restricted_growth_strings(m, k):
        yield SetPartition(m, _blocks_from_rgs(rgs, ground))


def enumerate_ordered_partitions(m: int, d: int) -> Iterator[OrderedPartition]:
    """Yield all ``(d+1)**m`` ordered partitions of ``{1..m}`` into ``d+1`` blocks.

    Index ``i`` goes to block ``a[i-1]`` where ``a`` runs through base-(d+1)
    digit strings in counting order (index 1 is the most significant digit).
    """
    _check_nonneg("m", m)
    _check_nonneg("d", d)
    for digits in itertools.product(range(d + 1), repeat=m):
        blocks: list[list[int]] = [[] for _ in range(d + 1)]
        for i, v in enumerate(digits, start=1):
            blocks[v].append(i)
        yield OrderedPartition(m, tuple(tuple(b) for b in blocks))


def _nested(ground: tuple[int, ...], level: int) -> Iterator[NestedPartition]:
    if level == 0:
        yield NestedPartition(0, ground)
        return
    for rgs in restricted_growth_strings(len(ground)):
        blocks = _blocks_from_rgs(rgs, ground)
        for kids in itertools.product(*(list(_nested(b, level - 1)) for b in blocks)):
            yield NestedPartition(level, ground, tuple(kids))


def enumerate_nested_partitions(m: int, l: int) -> Iterator[NestedPartition]:
    """Yield the level-``l`` nested partitions of ``{1..m}``.

    For each top-level partition (restricted-growth order) the cartesian
    product of level-(l-1) nestings of its blocks is produced.

    >>> sum(1 for _ in enumerate_nested_partitions(3, 2))
    12
    """
    _check_nonneg("m", m)
    _check_nonneg("l", l)
    yield from _nested(tuple(range(1, m + 1)), l)
