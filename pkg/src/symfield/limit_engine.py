"""
Large-N limits of conjugacy-class random walks.

A limiting class is the pair (alpha, lambda) where alpha is the limiting
fraction of moved points and lambda(i), i >= 2, the limiting proportion of
moved points lying on i-cycles.  For evanescent classes (alpha = 0) the
exclusive cycle moments m_n(t) have a closed Lagrange-inversion form and the
mean spectral measure is atoms at roots of unity plus a uniform part.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize, special
from scipy.integrate import solve_ivp

from .diagrams import (
    CHAIN,
    NECKLACE,
    NOT_PARURE,
    Partition,
    classify_parure,
    ears_and_head,
    extract,
    identity,
)
from .errors import CapacityError, NumericalError, ValidationError

SUM_TOL = 1e-12
ODE_KMAX = 8
SERIES_CAP_CLOSED = 1 << 22
SERIES_CAP_GENERIC = 1 << 13


@dataclass(frozen=True)
class LimitClass:
    alpha: float = 0.0
    lam: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        a = float(self.alpha)
        if not 0.0 <= a <= 1.0:
            raise ValidationError(f"alpha must lie in [0, 1], got {a}")
        clean = {}
        for i, v in dict(self.lam).items():
            i, v = int(i), float(v)
            if i < 2:
                raise ValidationError(f"lambda is indexed by i >= 2, got {i}")
            if v < 0 or not math.isfinite(v):
                raise ValidationError(f"lambda({i}) must be a finite non-negative number")
            if v > 0:
                clean[i] = v
        if sum(clean.values()) > 1 + SUM_TOL:
            raise ValidationError("sum of lambda(i) exceeds 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "lam", dict(sorted(clean.items())))

    @property
    def evanescent(self) -> bool:
        return self.alpha == 0.0

    @property
    def i_max(self) -> int:
        return max(self.lam, default=1)

    def l(self, i: int) -> float:
        return self.lam.get(i, 0.0)

    @property
    def total(self) -> float:
        return sum(self.lam.values())

    def ls_coeffs(self) -> np.ndarray:
        """Coefficients of LS(z) = sum_n lambda(n+1) z^n (index = power of z)."""
        c = np.zeros(self.i_max)
        for i, v in self.lam.items():
            c[i - 1] = v
        return c

    def ls(self, z):
        return sum(v * np.power(z, i - 1) for i, v in self.lam.items())

    def ls_prime(self, z):
        return sum(v * (i - 1) * np.power(z, i - 2) for i, v in self.lam.items())

    def is_transposition(self) -> bool:
        return self.lam == {2: 1.0}

    @classmethod
    def from_json(cls, data) -> "LimitClass":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, Mapping):
            raise ValidationError("limit class JSON must be an object")
        try:
            return cls(float(data.get("alpha", 0.0)), {int(k): float(v) for k, v in data.get("lambda", {}).items()})
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"bad limit class JSON: {exc}") from exc

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "lambda": {str(i): v for i, v in self.lam.items()}}


def transposition_limit() -> LimitClass:
    return LimitClass(0.0, {2: 1.0})


def _require_evanescent(lc: LimitClass, what: str):
    if not lc.evanescent:
        raise ValidationError(f"{what} needs an evanescent class (alpha = 0); use ode_evolve for alpha > 0")


# -- closed-form exclusive moments --------------------------------------------------


def _moments_transposition(t: float, K: int) -> np.ndarray:
    n = np.arange(1, K + 1, dtype=float)
    if t == 0:
        out = np.zeros(K)
        out[0] = 1.0
        return out
    logm = -n * t + (n - 1) * math.log(t) + (n - 2) * np.log(n) - special.gammaln(n)
    return np.exp(logm)


def _moments_generic(t: float, lc: LimitClass, K: int) -> np.ndarray:
    """m_1..m_K by iterating LS^k and accumulating every term in log space."""
    a = lc.ls_coeffs()
    logacc = np.full(K, -np.inf)
    logacc[0] = 0.0  # k = 0 term, only for n = 1
    if t > 0 and a.any():
        logt = math.log(t)
        row = np.zeros(K)
        row[0] = 1.0
        logscale = 0.0
        logn = np.log(np.arange(1, K + 1, dtype=float))
        with np.errstate(divide="ignore"):
            for k in range(1, K):
                row = np.convolve(row, a)[:K]
                mx = row.max()
                if mx <= 0:
                    break
                row /= mx
                logscale += math.log(mx)
                j = np.arange(k, K)
                vals = row[k:]
                nz = vals > 0
                if not nz.any():
                    continue
                jj = j[nz]
                term = k * logt + (k - 1) * logn[jj] - special.gammaln(k + 1) + logscale + np.log(vals[nz])
                logacc[jj] = np.logaddexp(logacc[jj], term)
    n = np.arange(1, K + 1, dtype=float)
    return np.exp(logacc - n * t)


def exclusive_moments(t: float, lc: LimitClass, K: int) -> np.ndarray:
    """Array whose entry n-1 is m_n(t), for n = 1..K."""
    _require_evanescent(lc, "exclusive_moments")
    if t < 0:
        raise ValidationError("t must be non-negative")
    if lc.is_transposition():
        return _moments_transposition(t, K)
    return _moments_generic(t, lc, K)


def mnc(n: int, t: float, lc: LimitClass) -> float:
    """Limit of the exclusive moment of an n-cycle at time t."""
    if n < 1:
        raise ValidationError("n must be positive")
    return float(exclusive_moments(t, lc, n)[n - 1])


def kcycle_mnc(n: int, t: float, k: int) -> float:
    """Closed form for walks jumping by uniform k-cycles."""
    u, r = divmod(n - 1, k - 1)
    if r:
        return 0.0
    return math.exp(-n * t) * t ** u * n ** (u - 1) / math.factorial(u)


# -- fixed point, critical time, tails ----------------------------------------------


def critical_time(lc: LimitClass) -> float:
    """Time at which a uniform component first appears (0 when sum lambda < 1)."""
    _require_evanescent(lc, "critical_time")
    if abs(lc.total - 1) > SUM_TOL:
        return 0.0
    drift = sum((j - 1) * v for j, v in lc.lam.items())
    return 1.0 / drift


def atomic_mass(t: float, lc: LimitClass) -> float:
    """Smallest root in (0, 1] of z exp(-t (LS(z) - 1)) = 1."""
    _require_evanescent(lc, "atomic_mass")
    if t < 0:
        raise ValidationError("t must be non-negative")
    if t == 0:
        return 1.0

    def f(z):
        return math.log(z) - t * (lc.ls(z) - 1)

    def fp(z):
        return 1 / z - t * lc.ls_prime(z)

    eps = 1e-14
    if fp(1.0) >= 0:
        zstar = 1.0
    else:
        lo, hi = eps, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if fp(mid) > 0:
                lo = mid
            else:
                hi = mid
        zstar = lo
    if f(zstar) <= 0:
        # only touches zero at the maximum
        return zstar
    lo, hi = eps, zstar
    if f(lo) >= 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    return hi


def _chernoff(t: float, lc: LimitClass) -> tuple[float, float]:
    """(r, rho) minimizing exp(t (LS(r) - 1)) / r; then m_n <= (r/n) rho^n."""

    def g(u):
        r = math.exp(u)
        return t * (lc.ls(r) - 1) - u

    res = optimize.minimize_scalar(g, bounds=(-20.0, 5.0), method="bounded", options={"xatol": 1e-12})
    return math.exp(res.x), math.exp(res.fun)


def tail_bracket(t: float, lc: LimitClass, K: int, power: float = 0.0) -> tuple[float, float]:
    """
    Bounds (lo, hi) on sum_{n > K} m_n(t) / n**power.

    Raises CapacityError when no geometric or Stirling bound applies.
    """
    if t == 0:
        return 0.0, 0.0
    if lc.is_transposition():
        # m_n = q^n / (t sqrt(2 pi) n^{3/2}) * exp(-theta / (12 n)), theta in (0, 1)
        q = t * math.exp(1 - t)
        z = float(special.zeta(1.5 + power, K + 1))
        c = 1 / (t * math.sqrt(2 * math.pi))
        hi = c * q ** (K + 1) * z if q < 1 else c * z
        lo = c * z * math.exp(-1 / (12 * (K + 1))) if q >= 1 - 1e-15 else 0.0
        return lo, hi
    r, rho = _chernoff(t, lc)
    if rho >= 1 - 1e-9:
        raise CapacityError("series tail cannot be certified at this (class, t); too close to criticality")
    hi = r * rho ** (K + 1) / ((K + 1) ** (1 + power) * (1 - rho))
    return 0.0, hi


@dataclass(frozen=True)
class SeriesSum:
    value: float
    error: float
    terms: int
    moments: np.ndarray


def certified_sum(t: float, lc: LimitClass, tol: float = 1e-9, power: float = 0.0, K0: int = 64) -> SeriesSum:
    """sum_n m_n(t) / n**power with a certified truncation error below tol."""
    _require_evanescent(lc, "certified_sum")
    cap = SERIES_CAP_CLOSED if lc.is_transposition() else SERIES_CAP_GENERIC
    K = K0
    while True:
        lo, hi = tail_bracket(t, lc, K, power)
        if (hi - lo) / 2 <= tol or K >= cap:
            break
        K *= 2
    if (hi - lo) / 2 > tol:
        raise CapacityError(f"tail bound {(hi - lo) / 2:.3g} exceeds tol {tol:g} at the term cap {cap}")
    m = exclusive_moments(t, lc, K)
    n = np.arange(1, K + 1, dtype=float)
    partial = math.fsum(m / n ** power)
    return SeriesSum(partial + (lo + hi) / 2, (hi - lo) / 2, K, m)


@dataclass(frozen=True)
class SpectralMeasure:
    t: float
    atom_weights: dict  # n -> m_n(t), spread evenly over the n-th roots of unity
    tail_mass: float  # atomic mass carried by atoms of order > max(atom_weights)
    lebesgue_weight: float
    tail_error: float

    @property
    def total_mass(self) -> float:
        return math.fsum(self.atom_weights.values()) + self.tail_mass + self.lebesgue_weight

    def moment(self, n: int) -> float:
        """Integral of z^n; atoms of order d contribute only when d divides n."""
        if n == 0:
            return self.total_mass
        n = abs(n)
        if n > max(self.atom_weights):
            raise ValidationError("moment order exceeds the tabulated atoms")
        return math.fsum(w for d, w in self.atom_weights.items() if n % d == 0)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "atoms": {str(n): w for n, w in self.atom_weights.items()},
            "tail_mass": self.tail_mass,
            "lebesgue_weight": self.lebesgue_weight,
            "tail_error": self.tail_error,
        }


def spectral_measure(t: float, lc: LimitClass, n_max: int | None = None, tol: float = 1e-9) -> SpectralMeasure:
    """Mean limiting eigenvalue distribution; atoms up to an automatically certified order."""
    _require_evanescent(lc, "spectral_measure")
    s = certified_sum(t, lc, tol, K0=n_max or 64)
    mass = atomic_mass(t, lc)
    partial = math.fsum(s.moments)
    atoms = {n + 1: float(w) for n, w in enumerate(s.moments) if w > 0 or n == 0}
    tail = max(0.0, s.value - partial)
    return SpectralMeasure(float(t), atoms, tail, max(0.0, 1 - mass), s.error)


def mean_distance(t: float, lc: LimitClass, tol: float = 1e-9) -> float:
    """Limiting normalized distance to the identity, 1 - sum_k m_k(t) / k."""
    _require_evanescent(lc, "mean_distance")
    if t == 0:
        return 0.0
    return 1 - certified_sum(t, lc, tol, power=1.0).value


# -- general-alpha ODE system -------------------------------------------------------------


def integer_partitions(k: int) -> list[tuple[int, ...]]:
    """Partitions of k as non-increasing tuples, in reverse lexicographic order."""
    out = []

    def rec(rem, mx, acc):
        if rem == 0:
            out.append(tuple(acc))
            return
        for part in range(min(rem, mx), 0, -1):
            acc.append(part)
            rec(rem - part, part, acc)
            acc.pop()

    rec(k, k, [])
    return out


def _representative(mu: tuple[int, ...]) -> np.ndarray:
    perm = []
    start = 0
    for L in mu:
        perm.extend(start + (i + 1) % L for i in range(L))
        start += L
    return np.asarray(perm, dtype=np.intp)


def _orbit_lengths(Q: np.ndarray) -> np.ndarray:
    """Per-row, per-point orbit length of a batch of permutations (M, k)."""
    M, k = Q.shape
    rows = np.arange(M)[:, None]
    start = np.broadcast_to(np.arange(k), (M, k))
    cur = Q.copy()
    length = np.zeros((M, k), dtype=np.intp)
    for j in range(1, k + 1):
        hit = (cur == start) & (length == 0)
        length[hit] = j
        cur = Q[rows, cur]
    return length


def _cycle_type_keys(Q: np.ndarray) -> np.ndarray:
    """Encode the cycle type of each row as counts per length (M, k)."""
    M, k = Q.shape
    L = _orbit_lengths(Q)
    counts = np.zeros((M, k + 1), dtype=np.intp)
    for length in range(1, k + 1):
        counts[:, length] = (L == length).sum(axis=1) // length
    return counts[:, 1:]


def _num_cycles(Q: np.ndarray) -> np.ndarray:
    L = _orbit_lengths(Q)
    return (1.0 / L).sum(axis=1).round().astype(np.intp)


def _counts_to_mu(counts) -> tuple[int, ...]:
    mu = []
    for length in range(len(counts), 0, -1):
        mu.extend([length] * int(counts[length - 1]))
    return tuple(mu)


def _coefficient(counts, lc: LimitClass) -> float:
    fixed = int(counts[0])
    nontrivial = int(sum(counts[1:]))
    if nontrivial == 0:
        return 0.0
    c = lc.alpha ** (nontrivial - 1) * (1 - lc.alpha) ** fixed
    for length in range(2, len(counts) + 1):
        if counts[length - 1]:
            c *= lc.l(length) ** int(counts[length - 1])
    return c


def _diag(k: int, alpha: float) -> float:
    if alpha == 0:
        return -float(k)
    return ((1 - alpha) ** k - 1) / alpha


_PERMS_CACHE: dict[int, np.ndarray] = {}


def _all_perms(k: int) -> np.ndarray:
    if k not in _PERMS_CACHE:
        _PERMS_CACHE[k] = np.array(list(itertools.permutations(range(k))), dtype=np.intp).reshape(-1, k)
    return _PERMS_CACHE[k]


def ode_matrix(lc: LimitClass, k: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Linear generator acting on the exclusive moments of level k, indexed by cycle type."""
    types = integer_partitions(k)
    index = {mu: i for i, mu in enumerate(types)}
    P = _all_perms(k)
    M = len(P)
    rows = np.arange(M)[:, None]
    Pinv = np.empty_like(P)
    Pinv[rows, P] = np.arange(k)
    d_id = k - _num_cycles(P)
    sig_counts = _cycle_type_keys(P)
    coef = np.array([_coefficient(c, lc) for c in sig_counts])
    is_id = d_id == 0
    A = np.zeros((len(types), len(types)))
    for mu in types:
        s0 = _representative(mu)
        d0 = k - len(mu)
        target = Pinv[:, s0]  # (sigma^{-1} sigma_0)(i) = sigma^{-1}(sigma_0(i))
        d_s = k - _num_cycles(target)
        keep = (d_id + d_s == d0) & ~is_id & (coef != 0)
        i = index[mu]
        A[i, i] += _diag(k, lc.alpha)
        if keep.any():
            tcounts = _cycle_type_keys(target[keep])
            for c, w in zip(tcounts, coef[keep]):
                A[i, index[_counts_to_mu(c)]] += w
    return types, A


@dataclass(frozen=True)
class ExclusiveMomentTable:
    t: float
    k_max: int
    values: dict  # cycle type (non-increasing tuple) -> m

    def __getitem__(self, mu):
        return self.values[tuple(sorted(mu, reverse=True))]

    def rows(self):
        return [(mu, v) for mu, v in self.values.items()]


def ode_evolve(lc: LimitClass, k_max: int, t: float, method: str = "DOP853") -> ExclusiveMomentTable:
    """Solve the linear system for all exclusive moments m_sigma(t), sigma of size <= k_max."""
    if k_max < 1:
        raise ValidationError("k_max must be positive")
    if k_max > ODE_KMAX:
        raise CapacityError(f"k_max = {k_max} exceeds the ODE bound {ODE_KMAX}")
    if t < 0:
        raise ValidationError("t must be non-negative")
    values = {(): 1.0}
    for k in range(1, k_max + 1):
        types, A = ode_matrix(lc, k)
        y0 = np.zeros(len(types))
        y0[types.index((1,) * k)] = 1.0
        if t == 0:
            y = y0
        else:
            sol = solve_ivp(lambda _s, y: A @ y, (0.0, t), y0, method=method, rtol=1e-12, atol=1e-14)
            if not sol.success:
                raise NumericalError(f"ODE integration failed: {sol.message}")
            y = sol.y[:, -1]
        values.update({mu: float(v) for mu, v in zip(types, y)})
    return ExclusiveMomentTable(float(t), k_max, values)


# -- generator limits and log-cumulants ------------------------------------------------


def _irreducible_generator(q: Partition, lc: LimitClass) -> float:
    cls = classify_parure(q)
    if cls.tag == NECKLACE:
        return -1.0 if cls.true_length == 1 else lc.l(cls.true_length)
    if cls.tag == CHAIN:
        return 1 - sum(lc.l(i) for i in range(2, cls.true_length + 1))
    return 0.0


def generator_limit(p: Partition, lc: LimitClass) -> float:
    """Large-N limit of the exclusive p-moment of the walk generator."""
    cls = classify_parure(p)
    if cls.tag == NOT_PARURE:
        return 0.0
    cycles = [extract(p, cols) for cols in p.cycles()]
    if len(cycles) == 1:
        return _irreducible_generator(p, lc)
    a = lc.alpha
    gen, base = [], []
    for (tag, s), q in zip(cls.per_cycle, cycles):
        base.append(1.0 if (tag == NECKLACE and s == 1) else 0.0)
        gen.append(_irreducible_generator(q, lc))
    if a == 0:
        return math.fsum(
            gen[i] * math.prod(base[j] for j in range(len(gen)) if j != i) for i in range(len(gen))
        )
    vals = [b + a * g for b, g in zip(base, gen)]
    return (math.prod(vals) - math.prod(base)) / a


def _lam_ext(lc: LimitClass, i: int) -> float:
    return 1.0 if i in (0, 1) else lc.l(i)


def _irreducible_logcumulant(p: Partition, lc: LimitClass) -> float:
    ears, head = ears_and_head(p)
    sign = -1.0 if len(ears) % 2 else 1.0
    if head is None:
        return sign
    cls = classify_parure(head)
    if cls.tag == NECKLACE:
        return sign * _lam_ext(lc, cls.true_length)
    if cls.tag == CHAIN:
        return sign * (1 - sum(lc.l(i) for i in range(2, cls.true_length + 1)))
    return 0.0


def log_cumulant(p: Partition, lc: LimitClass) -> float:
    """Log-cumulant transform of the limiting walk at the partition p (evanescent classes)."""
    if not lc.evanescent:
        raise ValidationError("log-cumulants are only available for evanescent classes")
    cycles = p.cycles()
    ident1 = identity(1)
    rest = [cols for cols in cycles if extract(p, cols) != ident1]
    if not rest:
        return -float(p.k)
    if len(rest) > 1:
        return 0.0
    return _irreducible_logcumulant(extract(p, rest[0]), lc)
