"""Non-crossing partitions of ``{1, ..., d}``.

Partitions are stored in canonical form: blocks sorted by their least
element and ascending inside each block.  All ground-set labels are
1-based, matching the usual combinatorial convention.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import SizeLimitError, ValidationError

#: Largest ground set accepted by :func:`enumerate_nc` (Catalan(14) = 2 674 440).
MAX_ENUMERATION_DEGREE = 14


@dataclass(frozen=True)
class NCPartition:
    """A non-crossing partition in canonical block order.

    ``d == 0`` with no blocks is the empty partition, which appears as the
    remainder once every block has been peeled off.
    """

    d: int
    blocks: tuple[tuple[int, ...], ...]

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]]) -> "NCPartition":
        canon = _canonical(blocks)
        d = sum(len(b) for b in canon)
        _check_set_partition(canon, d)
        if not _noncrossing(canon, d):
            raise ValidationError(f"partition {canon} is crossing")
        return cls(d, canon)

    def __len__(self) -> int:
        return len(self.blocks)

    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def is_pairing(self) -> bool:
        return all(len(b) == 2 for b in self.blocks)

    def __str__(self) -> str:
        inner = ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return "{" + inner + "}"


def _canonical(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    canon = [tuple(sorted(int(x) for x in b)) for b in blocks]
    if any(len(b) == 0 for b in canon):
        raise ValidationError("empty block")
    return tuple(sorted(canon, key=lambda b: b[0]))


def _check_set_partition(blocks: Sequence[Sequence[int]], d: int) -> None:
    seen = sorted(x for b in blocks for x in b)
    if seen != list(range(1, d + 1)):
        raise ValidationError(f"blocks {blocks} do not partition {{1..{d}}}")


def _noncrossing(blocks: Sequence[Sequence[int]], d: int) -> bool:
    owner = [0] * (d + 1)
    for idx, b in enumerate(blocks):
        for x in b:
            owner[x] = idx
    # every block met inside a gap of another block must stay inside that gap
    for b in blocks:
        for lo, hi in zip(b, b[1:]):
            for x in range(lo + 1, hi):
                other = blocks[owner[x]]
                if other[0] < lo or other[-1] > hi:
                    return False
    return True


def is_noncrossing(blocks: Iterable[Iterable[int]]) -> bool:
    """Return True iff ``blocks`` (a set partition of ``{1..d}``) is non-crossing.

    Raises
    ------
    ValidationError
        If ``blocks`` is not a set partition of ``{1, ..., d}``.
    """
    canon = _canonical(blocks)
    d = sum(len(b) for b in canon)
    _check_set_partition(canon, d)
    return _noncrossing(canon, d)


@lru_cache(maxsize=None)
def _nc_raw(lo: int, hi: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All NC partitions of the integer interval [lo, hi] (unsorted)."""
    if lo > hi:
        return ((),)
    out = []
    # choose the block containing lo: lo = v1 < v2 < ... < vs, the gaps and
    # the tail after vs are filled independently
    n = hi - lo
    rest = list(range(lo + 1, hi + 1))
    for mask in range(1 << n):
        first = (lo,) + tuple(rest[k] for k in range(n) if mask >> k & 1)
        segments = []
        for a, b in zip(first, first[1:]):
            segments.append(_nc_raw(a + 1, b - 1))
        segments.append(_nc_raw(first[-1] + 1, hi))
        combos: list[tuple[tuple[int, ...], ...]] = [(first,)]
        for seg in segments:
            combos = [c + s for c in combos for s in seg]
        out.extend(combos)
    return tuple(out)


def enumerate_nc(d: int) -> list[NCPartition]:
    """All non-crossing partitions of ``{1..d}``, sorted lexicographically.

    The result has Catalan(d) entries.  ``d`` is capped at
    :data:`MAX_ENUMERATION_DEGREE`.
    """
    if not 1 <= d <= MAX_ENUMERATION_DEGREE:
        raise SizeLimitError(
            f"enumeration degree {d} outside 1..{MAX_ENUMERATION_DEGREE}")
    parts = [tuple(sorted(p, key=lambda b: b[0])) for p in _nc_raw(1, d)]
    parts.sort()
    return [NCPartition(d, p) for p in parts]


@lru_cache(maxsize=None)
def nc_pairings(d: int) -> tuple[NCPartition, ...]:
    """Non-crossing pair partitions of ``{1..d}`` (empty for odd ``d``)."""
    if d == 0:
        return (NCPartition(0, ()),)
    if d % 2:
        return ()
    return tuple(p for p in enumerate_nc(d) if p.is_pairing())


def split_interval_block(pi: NCPartition) -> tuple[tuple[int, int], NCPartition]:
    """Peel off the interval block with the smallest start.

    Returns ``((k, l), rest)`` where ``{k, ..., l}`` is a block of ``pi`` and
    ``rest`` is the remaining partition relabelled onto ``{1..d-(l-k+1)}``.
    A non-crossing partition always has at least one interval block.
    """
    if pi.d < 1:
        raise ValidationError("cannot split the empty partition")
    for block in pi.blocks:
        if block[-1] - block[0] + 1 == len(block):
            k, l = block[0], block[-1]
            break
    else:  # pragma: no cover - impossible for non-crossing input
        raise ValidationError(f"{pi} has no interval block")
    width = l - k + 1
    rest = tuple(
        tuple(x if x < k else x - width for x in b)
        for b in pi.blocks if b[0] != k
    )
    return (k, l), NCPartition(pi.d - width, rest)


def catalan(n: int) -> int:
    """Catalan number ``C_n`` by the convolution recursion."""
    c = [1]
    for m in range(1, n + 1):
        c.append(sum(c[j] * c[m - 1 - j] for j in range(m)))
    return c[n]
