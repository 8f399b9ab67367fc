"""
Brute-force finite-N tensors for partition diagrams.

rho(p, N) is the 0/1 tensor on ({1..N})^{2k} whose entry at a multi-index I
is 1 when every block of p carries a constant index (p is finer than the
kernel of I).  Axes are ordered (top_1..top_k, bottom_1..bottom_k), i.e. the
labels +1..+k followed by -1..-k.  As an operator on (C^N)^{(x)k} the matrix
has rows indexed by the bottom multi-index and columns by the top one; with
this convention rho(p) @ rho(q) == N**kappa * rho(p o q).

Everything here is exponential in k and is meant as a test oracle at small
sizes only.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import linalg

from .diagrams import (
    CHAIN,
    NECKLACE,
    NOT_PARURE,
    Partition,
    classify_parure,
    enumerate_partitions,
    identity,
    perm_cycle_type,
    transpose,
)
from .errors import CapacityError, DimensionError, NumericalError, ValidationError

MAX_ENTRIES = 8 ** 6


def _check_capacity(N: int, k: int, capacity: int | None):
    limit = MAX_ENTRIES if capacity is None else capacity
    if N < 1:
        raise ValidationError("N must be positive")
    if N ** (2 * k) > limit:
        raise CapacityError(f"N^(2k) = {N}^{2 * k} exceeds oracle capacity {limit}")


def _label_axis(label: int, k: int) -> int:
    return label - 1 if label > 0 else k - label - 1


@dataclass(frozen=True)
class SparseTensorOp:
    """Coordinate-format tensor; ``coords`` has one row of 2k indices per stored entry."""

    N: int
    k: int
    coords: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.values)

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.N,) * (2 * self.k), dtype=self.values.dtype)
        if self.nnz:
            np.add.at(out, tuple(self.coords.T), self.values)
        return out

    def to_matrix(self) -> np.ndarray:
        """Operator form: rows = bottom multi-index, columns = top multi-index."""
        n = self.N ** self.k
        return self.to_dense().reshape(n, n).T

    @classmethod
    def from_dense(cls, arr: np.ndarray) -> "SparseTensorOp":
        arr = np.asarray(arr)
        if arr.ndim % 2 or len(set(arr.shape)) != 1:
            raise DimensionError("dense tensor must have 2k equal axes")
        coords = np.argwhere(arr != 0)
        return cls(arr.shape[0], arr.ndim // 2, coords, arr[tuple(coords.T)])


def _support(p: Partition, N: int, exclusive: bool) -> np.ndarray:
    """Multi-indices I with p finer than Ker(I) (or equal to it when exclusive)."""
    k = p.k
    nb = p.nc
    if exclusive:
        if nb > N:
            return np.zeros((0, 2 * k), dtype=np.intp)
        vals = np.array(list(itertools.permutations(range(N), nb)), dtype=np.intp).reshape(-1, nb)
    else:
        vals = np.indices((N,) * nb).reshape(nb, -1).T
    owner = np.empty(2 * k, dtype=np.intp)
    for j, b in enumerate(p.blocks):
        for x in b:
            owner[_label_axis(x, k)] = j
    return np.ascontiguousarray(vals[:, owner])


def rho(p: Partition, N: int, exclusive: bool = False, capacity: int | None = None) -> SparseTensorOp:
    """The indicator tensor rho_N(p), or rho_N(p^c) when ``exclusive``."""
    _check_capacity(N, p.k, capacity)
    coords = _support(p, N, exclusive)
    return SparseTensorOp(N, p.k, coords, np.ones(len(coords), dtype=np.int64))


def moment(p: Partition, matrices: Sequence[np.ndarray], exclusive: bool = False) -> float:
    """
    Normalized p-moment N^{-nc(p v id)} Tr(M_1 (x) ... (x) M_k rho_N(tp)).

    Contracted directly over the support of rho_N(tp); the tensor power of
    the matrices is never formed.
    """
    if len(matrices) != p.k:
        raise DimensionError(f"need {p.k} matrices, got {len(matrices)}")
    mats = [np.asarray(m) for m in matrices]
    N = mats[0].shape[0]
    if any(m.shape != (N, N) for m in mats):
        raise DimensionError("matrices must be square of equal size")
    _check_capacity(N, p.k, None)
    coords = _support(transpose(p), N, exclusive)
    k = p.k
    prod = np.ones(len(coords), dtype=np.result_type(*mats, np.float64))
    for j in range(k):
        prod = prod * mats[j][coords[:, j], coords[:, k + j]]
    return float(prod.sum()) / N ** p.n_cycles


def permutation_matrix(images: Sequence[int]) -> np.ndarray:
    """Matrix S with S e_i = e_{sigma(i)}; images are 0-based."""
    images = np.asarray(images)
    N = len(images)
    S = np.zeros((N, N), dtype=np.int64)
    S[images, np.arange(N)] = 1
    return S


def tensor_power(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Dense tensor with entries prod_j M_j[bottom_j, top_j] on axes (top..., bottom...)."""
    k = len(matrices)
    letters = "abcdefghijklmnop"
    top, bot = letters[:k], letters[k:2 * k]
    subscripts = ",".join(bot[j] + top[j] for j in range(k)) + "->" + top + bot
    return np.einsum(subscripts, *[np.asarray(m, dtype=float) for m in matrices])


# -- exclusive moments against permutations ----------------------------------------


def _cycle_counts(ct) -> tuple[Counter, int]:
    """Accept a sequence of cycle lengths or a mapping length -> number of points."""
    if isinstance(ct, Mapping):
        counts = Counter()
        for L, pts in ct.items():
            L, pts = int(L), int(pts)
            if pts % L:
                raise ValidationError(f"{pts} points cannot form {L}-cycles")
            counts[L] += pts // L
    else:
        counts = Counter(int(L) for L in ct)
    if any(L < 1 for L in counts):
        raise ValidationError("cycle lengths must be positive")
    return counts, sum(L * c for L, c in counts.items())


def _falling(n: int, r: int) -> int:
    return math.perm(n, r) if 0 <= r <= n else 0


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for sub in _set_partitions(rest):
        yield [[first]] + sub
        for i in range(len(sub)):
            yield sub[:i] + [[first] + sub[i]] + sub[i + 1:]


def embedding_count(necklaces: Sequence[int], chains: Sequence[int], cycles: Counter) -> int:
    """
    Number of injective placements of necklaces and chains into a permutation.

    A necklace of length s fills one whole orbit of length exactly s (s
    rotations).  A chain of length s is a path of s+1 consecutive points of a
    single orbit.  Distinct pieces use disjoint points.
    """
    avail = Counter(cycles)
    base = 1
    for s, n in Counter(necklaces).items():
        base *= _falling(avail[s], n) * s ** n
        avail[s] -= n
        if base == 0:
            return 0
    arcs = [s + 1 for s in chains]
    if not arcs:
        return base
    lengths = sorted(L for L, c in avail.items() if c > 0)
    total = 0
    for groups in _set_partitions(arcs):
        weights = []
        for g in groups:
            A, r = sum(g), len(g)
            weights.append(
                {L: L * math.factorial(r - 1) * math.comb(L - A + r - 1, r - 1) for L in lengths if L >= A}
            )
        total += _assign(weights, 0, Counter(), avail)
    return base * total


def _assign(weights, i, used, avail):
    if i == len(weights):
        out = 1
        for L, u in used.items():
            out *= _falling(avail[L], u)
        return out
    total = 0
    for L, w in weights[i].items():
        if used[L] < avail[L]:
            used[L] += 1
            total += w * _assign(weights, i + 1, used, avail)
            used[L] -= 1
    return total


def perm_exclusive_moment(p: Partition, ct) -> float:
    """
    Exclusive moment m_{p^c}(S) for any permutation matrix S of the given cycle type.

    ``ct`` is either a sequence of cycle lengths or a mapping
    ``{length: number of points}``.  Only the parure structure of p matters;
    non-parures give 0 without building any tensor.
    """
    cls = classify_parure(p)
    if cls.tag == NOT_PARURE:
        return 0.0
    cycles, N = _cycle_counts(ct)
    neck = [s for tag, s in cls.per_cycle if tag == NECKLACE]
    chain = [s for tag, s in cls.per_cycle if tag == CHAIN]
    return embedding_count(neck, chain, cycles) / N ** len(cls.per_cycle)


# -- cumulants ----------------------------------------------------------------------


@dataclass(frozen=True)
class CumulantVector:
    k: int
    values: dict

    def to_json(self) -> list:
        return [{"partition": p.to_json(), "value": float(v)} for p, v in self.values.items()]


def _basis(k: int):
    return enumerate_partitions(k, "all")


def gram_matrix(k: int, N: int) -> np.ndarray:
    """Exact pairwise contractions <rho(p), rho(q)> = N^{nc(p v q)}."""
    from .diagrams import join

    basis = _basis(k)
    n = len(basis)
    G = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            G[a, b] = G[b, a] = float(N) ** join(basis[a], basis[b]).nc
    return G


def extract_cumulants(T: SparseTensorOp | np.ndarray, N: int | None = None) -> CumulantVector:
    """
    Coordinates kappa_p of T in the expansion
    T = sum_p kappa_p / N^{nc(p) - nc(p v id)} rho_N(p).
    """
    dense = T.to_dense() if isinstance(T, SparseTensorOp) else np.asarray(T, dtype=float)
    k = dense.ndim // 2
    N = dense.shape[0]
    if N < 2 * k:
        raise ValidationError(f"N={N} < 2k={2 * k}: diagram tensors are not a basis")
    basis = _basis(k)
    rhs = np.array([dense[tuple(_support(p, N, False).T)].sum() for p in basis], dtype=float)
    G = gram_matrix(k, N)
    # rescale columns/rows by N^{nc(p)/2} to tame the dynamic range
    scale = np.array([float(N) ** (p.nc / 2) for p in basis])
    Gs = G / np.outer(scale, scale)
    try:
        c = linalg.solve(Gs, rhs / scale, assume_a="pos") / scale
    except linalg.LinAlgError as exc:
        raise NumericalError(f"singular Gram matrix: {exc}") from exc
    values = {p: float(c[i]) * float(N) ** (p.nc - p.n_cycles) for i, p in enumerate(basis)}
    return CumulantVector(k, values)


def reconstruct(cv: CumulantVector, N: int) -> np.ndarray:
    """Dense tensor sum_p kappa_p / N^{nc(p) - nc(p v id)} rho_N(p)."""
    _check_capacity(N, cv.k, None)
    out = np.zeros((N,) * (2 * cv.k))
    for p, v in cv.values.items():
        if v:
            idx = tuple(_support(p, N, False).T)
            out[idx] += v / float(N) ** (p.nc - p.n_cycles)
    return out


# -- class tensors --------------------------------------------------------------------


def class_elements(cycle_type: Sequence[int], N: int) -> list[tuple[int, ...]]:
    """All permutations of {0..N-1} with the given cycle type (as 0-based images)."""
    if N > 8:
        raise CapacityError("class enumeration limited to N <= 8")
    target = tuple(sorted(cycle_type, reverse=True))
    if sum(target) != N:
        raise ValidationError("cycle type must sum to N")
    out = []
    for perm in itertools.permutations(range(N)):
        if perm_cycle_type([x + 1 for x in perm]) == target:
            out.append(perm)
    return out


def average_tensor(perms: Sequence[Sequence[int]], k: int) -> np.ndarray:
    """Mean of S^{(x)k} over the given permutations (0-based images)."""
    perms = list(perms)
    N = len(perms[0])
    _check_capacity(N, k, None)
    acc = np.zeros((N,) * (2 * k))
    for perm in perms:
        S = permutation_matrix(perm)
        acc += tensor_power([S] * k)
    return acc / len(perms)


def generator_tensor(cycle_type: Sequence[int], k: int) -> np.ndarray:
    """
    The generator G_k^N = N / lambda_N(1^c) (E[sigma^{(x)k}] - id), sigma uniform in the class.
    """
    N = sum(cycle_type)
    moved = sum(L for L in cycle_type if L > 1)
    if moved == 0:
        raise ValidationError("the identity class does not generate a walk")
    avg = average_tensor(class_elements(cycle_type, N), k)
    ident = rho(identity(k), N).to_dense().astype(float)
    return N / moved * (avg - ident)
