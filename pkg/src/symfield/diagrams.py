"""
Partition diagrams on two rows of k vertices.

A partition of {1..k, 1'..k'} is stored with signed labels: +i for the top
vertex i and -i for the bottom vertex i'.  Blocks are kept in a canonical
order (labels sorted inside a block, blocks sorted by their smallest label)
so that equality and hashing are structural.

Permutations embed as the diagrams {{i, sigma(i)'}}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, DimensionError, ValidationError

__all__ = [
    "Partition",
    "ParureClass",
    "identity",
    "zero",
    "e1",
    "cycle",
    "from_permutation",
    "compose",
    "join",
    "tensor",
    "extract",
    "transpose",
    "coarser",
    "distance",
    "doubled_distance",
    "geodesic_leq",
    "classify_parure",
    "ears_and_head",
    "enumerate_partitions",
    "finer_partitions",
    "finer_compatible",
    "bell",
    "perm_cycle_type",
    "perm_compose",
    "perm_inverse",
    "perm_num_cycles",
]

NECKLACE = "Necklace"
CHAIN = "Chain"
NOT_PARURE = "NotParure"
MIXED_PARURE = "MixedParure"

DEFAULT_BOUNDS = {"all": 4, "irreducible": 4, "permutations": 8}


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb

    def groups(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def _canonical(blocks: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted((tuple(sorted(b)) for b in blocks), key=lambda b: b[0]))


@dataclass(frozen=True)
class Partition:
    """A set partition of the 2k labels {+1..+k, -1..-k}."""

    k: int
    blocks: tuple[tuple[int, ...], ...] = field(compare=True)

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ValidationError(f"k must be a positive integer, got {self.k!r}")
        seen = []
        for b in self.blocks:
            if len(b) == 0:
                raise ValidationError("empty block")
            seen.extend(b)
        expected = set(range(1, self.k + 1)) | set(range(-self.k, 0))
        if len(seen) != len(set(seen)):
            raise ValidationError("duplicate label in partition")
        if set(seen) != expected:
            raise ValidationError(
                f"labels must be exactly +-1..+-{self.k}, got {sorted(set(seen))}"
            )
        object.__setattr__(self, "blocks", _canonical(self.blocks))

    # -- construction / serialization -------------------------------------

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], k: int | None = None) -> "Partition":
        blocks = [tuple(int(x) for x in b) for b in blocks]
        if any(x == 0 for b in blocks for x in b):
            raise ValidationError("label 0 is not allowed")
        if k is None:
            k = max((abs(x) for b in blocks for x in b), default=0)
        return cls(k, tuple(blocks))

    @classmethod
    def from_json(cls, data) -> "Partition":
        """Parse the array-of-arrays form, e.g. ``[[1,-2],[2,-1]]``."""
        if not isinstance(data, (list, tuple)) or not data:
            raise ValidationError("partition JSON must be a non-empty array of arrays")
        blocks = []
        for b in data:
            if not isinstance(b, (list, tuple)) or not b:
                raise ValidationError("each block must be a non-empty array")
            for x in b:
                if isinstance(x, bool) or not isinstance(x, int):
                    raise ValidationError(f"labels must be integers, got {x!r}")
            blocks.append(b)
        return cls.from_blocks(blocks)

    def to_json(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    def __str__(self):
        def fmt(x):
            return f"{x}" if x > 0 else f"{-x}'"

        return "{" + ", ".join("{" + ",".join(fmt(x) for x in b) + "}" for b in self.blocks) + "}"

    # -- basic statistics ---------------------------------------------------

    @property
    def nc(self) -> int:
        """Number of blocks."""
        return len(self.blocks)

    def block_of(self) -> dict[int, int]:
        return {x: i for i, b in enumerate(self.blocks) for x in b}

    def cycles(self) -> list[tuple[int, ...]]:
        """Column sets of the blocks of p v id."""
        joined = join(self, identity(self.k))
        return [tuple(x for x in b if x > 0) for b in joined.blocks]

    @property
    def n_cycles(self) -> int:
        return join(self, identity(self.k)).nc

    def is_irreducible(self) -> bool:
        return self.n_cycles == 1

    def is_permutation(self) -> bool:
        return all(len(b) == 2 and b[0] < 0 < b[1] for b in self.blocks)

    def to_permutation(self) -> tuple[int, ...]:
        """Images (sigma(1), ..., sigma(k)) for a permutation diagram."""
        if not self.is_permutation():
            raise ValidationError(f"{self} is not a permutation")
        images = [0] * self.k
        for neg, pos in self.blocks:
            images[pos - 1] = -neg
        return tuple(images)


@dataclass(frozen=True)
class ParureClass:
    tag: str
    true_length: int
    per_cycle: tuple[tuple[str, int], ...] = ()


# -- named partitions --------------------------------------------------------


def identity(k: int) -> Partition:
    return Partition(k, tuple((i, -i) for i in range(1, k + 1)))


def zero(k: int) -> Partition:
    """The one-block partition 0_k."""
    return Partition(k, (tuple(range(1, k + 1)) + tuple(range(-k, 0)),))


def e1() -> Partition:
    return Partition(1, ((1,), (-1,)))


def from_permutation(images: Sequence[int]) -> Partition:
    """Diagram {{i, sigma(i)'}} of the permutation i -> images[i-1] (1-based)."""
    k = len(images)
    if sorted(images) != list(range(1, k + 1)):
        raise ValidationError(f"not a permutation of 1..{k}: {list(images)}")
    return Partition(k, tuple((i, -images[i - 1]) for i in range(1, k + 1)))


def cycle(n: int) -> Partition:
    """The n-cycle (1,...,n), i.e. i -> i+1 mod n."""
    return from_permutation([i % n + 1 for i in range(1, n + 1)])


# -- algebraic operations -----------------------------------------------------


def _check_same_k(p: Partition, q: Partition):
    if p.k != q.k:
        raise DimensionError(f"partitions on {p.k} and {q.k} columns")


def transpose(p: Partition) -> Partition:
    """Flip the diagram upside down; the inverse for permutations."""
    return Partition(p.k, tuple(tuple(-x for x in b) for b in p.blocks))


def coarser(p: Partition, q: Partition) -> bool:
    """True when every block of p sits inside a block of q (p is finer than q)."""
    _check_same_k(p, q)
    where = q.block_of()
    return all(len({where[x] for x in b}) == 1 for b in p.blocks)


def join(p: Partition, q: Partition) -> Partition:
    """Finest partition coarser than both p and q."""
    _check_same_k(p, q)
    uf = _UnionFind([x for b in p.blocks for x in b])
    for part in (p, q):
        for b in part.blocks:
            for x in b[1:]:
                uf.union(b[0], x)
    return Partition(p.k, tuple(tuple(g) for g in uf.groups()))


def compose(p: Partition, q: Partition) -> tuple[Partition, int]:
    """
    Stack q above p and erase the middle row.

    Returns (p o q, kappa) where kappa counts the connected components that
    live entirely in the erased middle row, so that pq = N**kappa (p o q).
    """
    _check_same_k(p, q)
    k = p.k
    # nodes: ("t", i) top of q, ("m", i) glued row, ("b", i) bottom of p
    nodes = [(r, i) for r in "tmb" for i in range(1, k + 1)]
    uf = _UnionFind(nodes)
    for b in q.blocks:
        mapped = [("t", x) if x > 0 else ("m", -x) for x in b]
        for y in mapped[1:]:
            uf.union(mapped[0], y)
    for b in p.blocks:
        mapped = [("m", x) if x > 0 else ("b", -x) for x in b]
        for y in mapped[1:]:
            uf.union(mapped[0], y)
    blocks = []
    kappa = 0
    for g in uf.groups():
        labels = [i if r == "t" else -i for r, i in g if r != "m"]
        if labels:
            blocks.append(labels)
        else:
            kappa += 1
    return Partition(k, tuple(tuple(b) for b in blocks)), kappa


def tensor(p: Partition, q: Partition) -> Partition:
    """Place q to the right of p."""
    shift = p.k
    blocks = list(p.blocks) + [tuple(x + shift if x > 0 else x - shift for x in b) for b in q.blocks]
    return Partition(p.k + q.k, tuple(blocks))


def extract(p: Partition, columns: Iterable[int]) -> Partition | None:
    """
    Restrict p to the symmetric label set {i, i' : i in columns}.

    Remaining columns are relabelled 1..len(columns) in increasing order.
    Returns None for an empty column set.
    """
    cols = sorted(set(columns))
    if any(c < 1 or c > p.k for c in cols):
        raise ValidationError(f"columns {cols} out of range 1..{p.k}")
    if not cols:
        return None
    relabel = {c: j + 1 for j, c in enumerate(cols)}
    blocks = []
    for b in p.blocks:
        nb = [relabel[x] if x > 0 else -relabel[-x] for x in b if abs(x) in relabel]
        if nb:
            blocks.append(tuple(nb))
    return Partition(len(cols), tuple(blocks))


# -- metric structure ---------------------------------------------------------


def doubled_distance(p: Partition, q: Partition) -> int:
    """2 d(p, q) = nc(p) + nc(q) - 2 nc(p v q), an exact integer."""
    return p.nc + q.nc - 2 * join(p, q).nc


def distance(p: Partition, q: Partition) -> Fraction:
    return Fraction(doubled_distance(p, q), 2)


def geodesic_leq(p: Partition, q: Partition) -> bool:
    """p <= q in the geodesic order: d(id, p) + d(p, q) == d(id, q)."""
    ident = identity(p.k)
    return doubled_distance(ident, p) + doubled_distance(p, q) == doubled_distance(ident, q)


# -- parures, ears and heads ----------------------------------------------------


def _classify_irreducible(q: Partition) -> tuple[str, int]:
    tops, bots = [], []
    top_only = bot_only = 0
    for b in q.blocks:
        top = frozenset(x for x in b if x > 0)
        bot = frozenset(-x for x in b if x < 0)
        if top:
            tops.append(top)
        if bot:
            bots.append(bot)
        if top and not bot:
            top_only += 1
        elif bot and not top:
            bot_only += 1
    if set(tops) != set(bots):
        return NOT_PARURE, 0
    if top_only == 0 and bot_only == 0:
        return NECKLACE, len(tops)
    if top_only == 1 and bot_only == 1:
        return CHAIN, len(tops)
    return NOT_PARURE, 0


def classify_parure(p: Partition) -> ParureClass:
    """Classify p as a necklace, a chain, a mixed parure or not a parure."""
    per_cycle = []
    for cols in p.cycles():
        tag, length = _classify_irreducible(extract(p, cols))
        if tag == NOT_PARURE:
            return ParureClass(NOT_PARURE, 0, ())
        per_cycle.append((tag, length))
    total = sum(length for _, length in per_cycle)
    if len(per_cycle) == 1:
        return ParureClass(per_cycle[0][0], total, tuple(per_cycle))
    return ParureClass(MIXED_PARURE, total, tuple(per_cycle))


def ears_and_head(p: Partition) -> tuple[frozenset[int], Partition | None]:
    """Columns i with i, i' in one block, and the extraction to the other columns."""
    where = p.block_of()
    ears = frozenset(i for i in range(1, p.k + 1) if where[i] == where[-i])
    rest = [i for i in range(1, p.k + 1) if i not in ears]
    return ears, extract(p, rest)


def insert_identity_columns(head: Partition | None, ears: Iterable[int], k: int) -> Partition:
    """Inverse of ears_and_head when every ear is a standalone block {i, i'}."""
    ears = sorted(set(ears))
    rest = [i for i in range(1, k + 1) if i not in ears]
    blocks = [(i, -i) for i in ears]
    if head is not None:
        if head.k != len(rest):
            raise DimensionError("head size does not match the non-ear columns")
        back = {j + 1: c for j, c in enumerate(rest)}
        blocks += [tuple(back[x] if x > 0 else -back[-x] for x in b) for b in head.blocks]
    elif rest:
        raise DimensionError("missing head for non-ear columns")
    return Partition(k, tuple(blocks))


# -- enumeration ---------------------------------------------------------------


def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _set_partitions(items: Sequence) -> Iterator[list[list]]:
    """Set partitions in restricted-growth-string order."""
    n = len(items)
    if n == 0:
        yield []
        return
    rgs = [0] * n

    def rec(i, m):
        if i == n:
            groups = [[] for _ in range(m + 1)]
            for x, g in zip(items, rgs):
                groups[g].append(x)
            yield groups
            return
        for g in range(m + 2):
            rgs[i] = g
            yield from rec(i + 1, max(m, g))

    rgs[0] = 0
    yield from rec(1, 0)


def enumerate_partitions(k: int, kind: str = "all", bound: int | None = None) -> list[Partition]:
    """All partitions of P_k (or only permutations / irreducible ones) in a fixed order."""
    if kind not in DEFAULT_BOUNDS:
        raise ValidationError(f"unknown kind {kind!r}")
    limit = DEFAULT_BOUNDS[kind] if bound is None else bound
    if k < 1:
        raise ValidationError("k must be positive")
    if k > limit:
        raise CapacityError(f"enumerate({k}, {kind}) exceeds bound {limit}")
    if kind == "permutations":
        return [from_permutation([x + 1 for x in perm]) for perm in itertools.permutations(range(k))]
    labels = list(range(1, k + 1)) + [-i for i in range(1, k + 1)]
    out = [Partition(k, tuple(tuple(g) for g in groups)) for groups in _set_partitions(labels)]
    if kind == "irreducible":
        out = [p for p in out if p.is_irreducible()]
    return out


def finer_partitions(p: Partition) -> list[Partition]:
    """Every partition whose blocks refine the blocks of p (p included)."""
    per_block = [list(_set_partitions(list(b))) for b in p.blocks]
    out = []
    for choice in itertools.product(*per_block):
        blocks = [tuple(g) for split in choice for g in split]
        out.append(Partition(p.k, tuple(blocks)))
    return out


def finer_compatible(p: Partition) -> list[Partition]:
    """Partitions p' finer than p with nc(p') - nc(p' v id) == nc(p) - nc(p v id)."""
    target = p.nc - p.n_cycles
    return [q for q in finer_partitions(p) if q.nc - q.n_cycles == target]


# -- small permutation helpers (tuples of 1-based images) ------------------------


def perm_compose(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    """(a o b)(i) = a(b(i))."""
    return tuple(a[b[i] - 1] for i in range(len(b)))


def perm_inverse(a: Sequence[int]) -> tuple[int, ...]:
    inv = [0] * len(a)
    for i, x in enumerate(a):
        inv[x - 1] = i + 1
    return tuple(inv)


def perm_cycle_type(a: Sequence[int]) -> tuple[int, ...]:
    """Cycle lengths sorted in decreasing order (an integer partition of k)."""
    seen = [False] * len(a)
    lengths = []
    for start in range(len(a)):
        if seen[start]:
            continue
        n = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = a[j] - 1
            n += 1
        lengths.append(n)
    return tuple(sorted(lengths, reverse=True))


def perm_num_cycles(a: Sequence[int]) -> int:
    return len(perm_cycle_type(a))


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)
