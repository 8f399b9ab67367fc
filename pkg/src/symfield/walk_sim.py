"""
Continuous-time conjugacy-class random walks on S(N).

The walk jumps at rate N / lambda_N(1^c); every jump multiplies the current
permutation on the left by a uniform element of the class.  Samples are
generated in batches: the state of each replica is kept as the *inverse*
permutation, because left multiplication by a cycle c_0 -> c_1 -> ... only
moves a few entries of the inverse (inv'[c_{i+1}] = inv[c_i]).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError

N_MAX_DEFAULT = 20
_BATCH_CELLS = 2_000_000


@dataclass(frozen=True)
class FiniteClass:
    """A conjugacy class of S(N): ``counts[i]`` is the number of points on i-cycles (i >= 2)."""

    N: int
    counts: Mapping[int, int] = field(default_factory=dict)
    allow_trivial: bool = False

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        clean = {}
        for i, pts in dict(self.counts).items():
            i, pts = int(i), int(pts)
            if i < 1 or pts < 0:
                raise ValidationError(f"invalid cycle entry {i}: {pts}")
            if pts % i:
                raise ValidationError(f"lambda_N({i}) = {pts} is not divisible by {i}")
            if i > 1 and pts:
                clean[i] = pts
        moved = sum(clean.values())
        ones = dict(self.counts).get(1, dict(self.counts).get("1"))
        if moved > self.N:
            raise ValidationError(f"class moves {moved} points but N = {self.N}")
        if ones is not None and int(ones) + moved != self.N:
            raise ValidationError("lambda_N(1) inconsistent with N")
        if moved == 0 and not self.allow_trivial:
            raise ValidationError("degenerate class: lambda_N(1^c) = 0")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @property
    def moved(self) -> int:
        """lambda_N(1^c), the number of points moved by a class element."""
        return sum(self.counts.values())

    @property
    def rate(self) -> float:
        return self.N / self.moved

    def cycle_lengths(self) -> list[int]:
        """Lengths of the non-trivial cycles, in increasing order."""
        return [i for i, pts in self.counts.items() for _ in range(pts // i)]

    def cycle_type(self) -> tuple[int, ...]:
        lengths = self.cycle_lengths() + [1] * (self.N - self.moved)
        return tuple(sorted(lengths, reverse=True))

    @classmethod
    def from_json(cls, data) -> "FiniteClass":
        if isinstance(data, str):
            data = json.loads(data)
        try:
            return cls(int(data["N"]), {int(i): int(v) for i, v in data.get("cycles", {}).items()})
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad finite class JSON: {exc}") from exc

    def to_json(self) -> dict:
        return {"N": int(self.N), "cycles": {str(i): v for i, v in self.counts.items()}}


def transposition_class(N: int) -> FiniteClass:
    return FiniteClass(N, {2: 2})


def macroscopic_class(N: int) -> FiniteClass:
    """A class moving floor(N/2) points, mostly through 3-cycles."""
    M = N // 2
    q, r = divmod(M, 3)
    if M < 2:
        raise ValidationError("N too small for a macroscopic class")
    if r == 0:
        counts = {3: 3 * q}
    elif r == 1:
        counts = {3: 3 * (q - 1), 2: 4}
    else:
        counts = {3: 3 * q, 2: 2}
    return FiniteClass(N, counts)


@dataclass(frozen=True)
class WalkSample:
    perm: np.ndarray  # 0-based images
    t: float
    jumps: int


def as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_class_element(c: FiniteClass, rng=None) -> np.ndarray:
    """Uniform element of the class: shuffle 0..N-1 and cut it into cycles."""
    rng = as_rng(rng)
    order = rng.permutation(c.N)
    perm = np.arange(c.N)
    pos = 0
    for L in c.cycle_lengths():
        cyc = order[pos:pos + L]
        perm[cyc] = np.roll(cyc, -1)
        pos += L
    return perm


def _shift_index(c: FiniteClass) -> np.ndarray:
    shift = []
    pos = 0
    for L in c.cycle_lengths():
        shift.extend(pos + (i + 1) % L for i in range(L))
        pos += L
    return np.asarray(shift, dtype=np.intp)


def _distinct_points(rng, R: int, m: int, N: int) -> np.ndarray:
    """R rows of m distinct uniform points, each row a uniform ordered sample."""
    if 4 * m <= N:
        pts = rng.integers(0, N, size=(R, m))
        while True:
            s = np.sort(pts, axis=1)
            bad = np.flatnonzero((np.diff(s, axis=1) == 0).any(axis=1))
            if bad.size == 0:
                return pts
            pts[bad] = rng.integers(0, N, size=(bad.size, m))
    base = np.broadcast_to(np.arange(N), (R, N))
    return rng.permuted(base, axis=1)[:, :m]


def simulate_inverse_batch(c: FiniteClass, t: float, B: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """B independent walks at time t; returns (inverse permutations (B, N), jump counts)."""
    if t < 0:
        raise ValidationError("t must be non-negative")
    if c.moved == 0:
        raise ValidationError("degenerate class: lambda_N(1^c) = 0")
    rng = as_rng(rng)
    N = c.N
    inv = np.tile(np.arange(N, dtype=np.int32), (B, 1))
    jumps = rng.poisson(t * c.rate, size=B)
    m = c.moved
    shift = _shift_index(c)
    for step in range(int(jumps.max(initial=0))):
        rows = np.flatnonzero(jumps > step)
        src = _distinct_points(rng, rows.size, m, N)
        dst = src[:, shift]
        r = rows[:, None]
        inv[r, dst] = inv[r, src]
    return inv, jumps


def simulate(c: FiniteClass, t: float, rng=None) -> WalkSample:
    """One walk S_t: a Poisson number of jumps, each sigma * S with sigma uniform in c."""
    inv, jumps = simulate_inverse_batch(c, t, 1, rng)
    perm = np.empty(c.N, dtype=np.intp)
    perm[inv[0]] = np.arange(c.N)
    return WalkSample(perm, float(t), int(jumps[0]))


# -- observables ---------------------------------------------------------------------


def cycle_statistics(perms: np.ndarray, n_max: int = N_MAX_DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """
    For a batch of permutations (B, N) return (counts, ncycles) where
    counts[b, n-1] is the number of n-cycles of row b for n <= n_max.
    The inverse permutation has the same cycle type, so either can be passed.
    """
    perms = np.atleast_2d(np.asarray(perms))
    B, N = perms.shape
    nodes = np.arange(B * N)
    targets = (perms + (np.arange(B) * N)[:, None]).ravel()
    graph = sparse.csr_matrix((np.ones(B * N, dtype=np.int8), (nodes, targets)), shape=(B * N, B * N))
    ncomp, labels = connected_components(graph, directed=True, connection="weak")
    sizes = np.bincount(labels, minlength=ncomp)
    row_of = np.empty(ncomp, dtype=np.intp)
    row_of[labels] = nodes // N
    capped = np.minimum(sizes, n_max + 1)
    table = np.bincount(row_of * (n_max + 2) + capped, minlength=B * (n_max + 2)).reshape(B, n_max + 2)
    ncycles = np.bincount(row_of, minlength=B)
    return table[:, 1:n_max + 1], ncycles


@dataclass(frozen=True)
class Observables:
    fixed_fraction: float
    exclusive_cycle_moments: np.ndarray  # index n-1 holds m_{(1..n)^c}
    normalized_distance: float
    trace_distance: float
    cycle_counts: dict


def observables(s: WalkSample | np.ndarray, n_max: int = N_MAX_DEFAULT) -> Observables:
    perm = s.perm if isinstance(s, WalkSample) else np.asarray(s)
    N = len(perm)
    lengths = np.bincount(cycle_lengths(perm), minlength=N + 1)
    counts = {n: int(lengths[n]) for n in np.flatnonzero(lengths)}
    mom = np.array([n * lengths[n] / N if n <= N else 0.0 for n in range(1, n_max + 1)])
    fixed = lengths[1] / N
    return Observables(
        fixed_fraction=float(fixed),
        exclusive_cycle_moments=mom,
        normalized_distance=float(1 - lengths.sum() / N),
        trace_distance=math.sqrt(max(0.0, 2 * (1 - fixed))),
        cycle_counts=counts,
    )


def cycle_lengths(perm: Sequence[int]) -> np.ndarray:
    perm = np.asarray(perm)
    N = len(perm)
    seen = np.zeros(N, dtype=bool)
    out = []
    for start in range(N):
        if seen[start]:
            continue
        n, j = 0, start
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            n += 1
        out.append(n)
    return np.asarray(out, dtype=np.intp)


def _parse_selector(name: str):
    if name in ("fixed_fraction", "trace"):
        return "fixed", None
    if name in ("normalized_distance", "trace_distance", "trace_distance_sq", "jumps"):
        return name, None
    if name.startswith("m:"):
        n = int(name[2:])
        if n < 1:
            raise ValidationError(f"bad cycle length in {name!r}")
        return "m", n
    raise ValidationError(f"unknown observable {name!r}")


def batch_observables(inv: np.ndarray, jumps: np.ndarray, names: Sequence[str]) -> dict[str, np.ndarray]:
    """Evaluate named observables on a batch of (inverse) permutations."""
    B, N = inv.shape
    parsed = {name: _parse_selector(name) for name in names}
    fixed = (inv == np.arange(N)).sum(axis=1) / N
    need_cycles = any(kind in ("m", "normalized_distance") for kind, _ in parsed.values())
    if need_cycles:
        n_max = max([n for kind, n in parsed.values() if kind == "m"] + [1])
        counts, ncyc = cycle_statistics(inv, n_max)
    out = {}
    for name, (kind, n) in parsed.items():
        if kind == "fixed":
            out[name] = fixed
        elif kind == "m":
            out[name] = n * counts[:, n - 1] / N
        elif kind == "normalized_distance":
            out[name] = 1 - ncyc / N
        elif kind == "trace_distance_sq":
            out[name] = 2 * (1 - fixed)
        elif kind == "trace_distance":
            out[name] = np.sqrt(2 * (1 - fixed))
        else:
            out[name] = jumps.astype(float)
    return out


def sample_observables(c: FiniteClass, t: float, samples: int, names: Sequence[str], rng=None) -> dict[str, np.ndarray]:
    """Raw per-replica observable values (replicas generated in fixed-size batches)."""
    rng = as_rng(rng)
    names = list(names)
    for name in names:
        _parse_selector(name)
    chunk = max(1, min(samples, _BATCH_CELLS // c.N))
    parts = {name: [] for name in names}
    done = 0
    while done < samples:
        B = min(chunk, samples - done)
        inv, jumps = simulate_inverse_batch(c, t, B, rng)
        for name, vals in batch_observables(inv, jumps, names).items():
            parts[name].append(vals)
        done += B
    return {name: np.concatenate(v) for name, v in parts.items()}


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    variance: float
    samples: int

    def to_json(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "variance": self.variance, "samples": self.samples}


def summarize(values: np.ndarray) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise ValidationError("need at least two samples")
    mean = math.fsum(values) / n
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return Estimate(mean, math.sqrt(var / n), var, n)


def _worker(args):
    c, t, n, names, seed = args
    return sample_observables(c, t, n, names, np.random.default_rng(seed))


def seed_sequence(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2 ** 63)))
    return np.random.SeedSequence(rng)


def run_parallel(fn, jobs: Sequence, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def estimate(
    c: FiniteClass,
    t: float,
    samples: int,
    observable: str | Sequence[str] = "fixed_fraction",
    rng=None,
    workers: int = 1,
) -> Estimate | dict[str, Estimate]:
    """
    Monte Carlo mean, standard error and variance of one or several observables.

    With ``workers == 1`` the result is a deterministic function of the seed.
    With more workers the replicas are split across processes with
    independent child seeds; the summaries use exact (order-insensitive)
    floating-point summation.
    """
    if samples < 2:
        raise ValidationError("samples must be at least 2")
    single = isinstance(observable, str)
    names = [observable] if single else list(observable)
    if workers <= 1:
        values = sample_observables(c, t, samples, names, as_rng(rng))
    else:
        seeds = seed_sequence(rng).spawn(workers)
        sizes = [samples // workers + (i < samples % workers) for i in range(workers)]
        jobs = [(c, t, n, names, s) for n, s in zip(sizes, seeds) if n > 0]
        parts = run_parallel(_worker, jobs, workers)
        values = {name: np.concatenate([p[name] for p in parts]) for name in names}
    out = {name: summarize(values[name]) for name in names}
    return out[names[0]] if single else out


def expected_fixed_fraction(N: int, t: float) -> float:
    """
    E[Tr(S_t)/N] for the transposition walk, exact at every N.

    A marked point is hit at rate 1 and then moves to a uniform other point,
    so its position relaxes at rate N/(N-1).
    """
    return 1 / N + (1 - 1 / N) * math.exp(-t * N / (N - 1))


def expected_trace_distance_sq(N: int, t: float) -> float:
    """E[d_N(id, S_t)^2] = 2 (1 - E[Tr(S_t)/N]) for the transposition walk."""
    return 2 * (1 - expected_fixed_fraction(N, t))
