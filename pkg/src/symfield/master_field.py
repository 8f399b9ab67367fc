"""
Wilson loops of the symmetric-group holonomy field on lasso words.

A loop is given as a word in facial lassos; each letter carries the area of
its face.  Holonomies of distinct faces are independent walks run for the
face area, and the holonomy of a concatenation reverses the order:
h(w_1 ... w_n) = h(w_n) ... h(w_1).

Two evaluators are provided: a rule-based large-N evaluator covering a small
but explicit family of words, and a finite-N Monte Carlo estimator that
works for any word.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NotReducible, ValidationError
from .limit_engine import LimitClass, mnc, transposition_limit
from .walk_sim import (
    Estimate,
    FiniteClass,
    as_rng,
    run_parallel,
    seed_sequence,
    simulate_inverse_batch,
    summarize,
    transposition_class,
)

_BATCH_CELLS = 2_000_000


@dataclass(frozen=True)
class LassoWord:
    letters: tuple[tuple[str, int], ...]
    areas: Mapping[str, float]

    def __post_init__(self):
        letters = []
        for item in self.letters:
            if len(item) != 2:
                raise ValidationError(f"letter must be [name, exponent], got {item!r}")
            name, e = item
            if not isinstance(name, str):
                raise ValidationError(f"face identifier must be a string, got {name!r}")
            if e not in (1, -1) or isinstance(e, bool):
                raise ValidationError(f"exponent must be +1 or -1, got {e!r}")
            letters.append((name, int(e)))
        areas = {str(k): float(v) for k, v in dict(self.areas).items()}
        for name, _ in letters:
            if name not in areas:
                raise ValidationError(f"face {name!r} has no area")
        for k, v in areas.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValidationError(f"area of {k!r} must be a non-negative number")
        object.__setattr__(self, "letters", tuple(letters))
        object.__setattr__(self, "areas", areas)

    @classmethod
    def from_json(cls, data) -> "LassoWord":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, Mapping) or "word" not in data:
            raise ValidationError("lasso JSON needs 'areas' and 'word'")
        return cls(tuple(tuple(x) for x in data["word"]), data.get("areas", {}))

    def to_json(self) -> dict:
        return {"areas": dict(self.areas), "word": [[n, e] for n, e in self.letters]}

    def faces(self) -> list[str]:
        return sorted({n for n, _ in self.letters})

    def relabel(self, mapping: Mapping[str, str]) -> "LassoWord":
        return LassoWord(
            tuple((mapping[n], e) for n, e in self.letters),
            {mapping[n]: a for n, a in self.areas.items() if n in mapping},
        )


# -- Monte Carlo ----------------------------------------------------------------------


def evaluate_word(letters: Sequence[tuple[str, int]], inverses: Mapping[str, np.ndarray]) -> np.ndarray:
    """
    Batch holonomy of a word given each face's holonomy as an inverse permutation.

    Returns the permutations (B, N) of h(w_n)...h(w_1), in image form.
    """
    any_inv = next(iter(inverses.values()))
    B, N = any_inv.shape
    perms = {}
    for name, inv in inverses.items():
        p = np.empty_like(inv)
        np.put_along_axis(p, inv, np.broadcast_to(np.arange(N, dtype=inv.dtype), inv.shape), axis=1)
        perms[name] = p
    cur = np.broadcast_to(np.arange(N), (B, N)).copy()
    for name, e in letters:
        h = perms[name] if e == 1 else inverses[name]
        cur = np.take_along_axis(h, cur, axis=1)
    return cur


def _wilson_values(word: LassoWord, c: FiniteClass, scale: float, samples: int, rng) -> np.ndarray:
    rng = as_rng(rng)
    N = c.N
    out = []
    chunk = max(1, min(samples, _BATCH_CELLS // N))
    done = 0
    while done < samples:
        B = min(chunk, samples - done)
        if not word.letters:
            out.append(np.ones(B))
        else:
            inv = {f: simulate_inverse_batch(c, word.areas[f] * scale, B, rng)[0] for f in word.faces()}
            P = evaluate_word(word.letters, inv)
            out.append((P == np.arange(N)).sum(axis=1) / N)
        done += B
    return np.concatenate(out)


def _wilson_worker(args):
    word, c, scale, n, seed = args
    return _wilson_values(word, c, scale, n, np.random.default_rng(seed))


def mc_wilson(
    word: LassoWord,
    N: int,
    samples: int,
    rng=None,
    scale: float = 1.0,
    finite_class: FiniteClass | None = None,
    workers: int = 1,
) -> Estimate:
    """Monte Carlo estimate of E[Tr(h(l)) / N] at finite N."""
    if N < 2:
        raise ValidationError("N must be at least 2")
    c = finite_class or transposition_class(N)
    if c.N != N:
        raise ValidationError("finite class size does not match N")
    if workers <= 1:
        vals = _wilson_values(word, c, scale, samples, rng)
    else:
        seeds = seed_sequence(rng).spawn(workers)
        sizes = [samples // workers + (i < samples % workers) for i in range(workers)]
        vals = np.concatenate(run_parallel(_wilson_worker, [(word, c, scale, n, s) for n, s in zip(sizes, seeds)], workers))
    return summarize(vals)


# -- analytic large-N rules --------------------------------------------------------------


def free_reduce(letters: Sequence[tuple[str, int]]) -> list[tuple[str, int]]:
    """Cancel adjacent x x^-1 pairs, then cyclically (the trace is conjugation invariant)."""
    stack: list[tuple[str, int]] = []
    for x in letters:
        if stack and stack[-1][0] == x[0] and stack[-1][1] == -x[1]:
            stack.pop()
        else:
            stack.append(x)
    while len(stack) >= 2 and stack[0][0] == stack[-1][0] and stack[0][1] == -stack[-1][1]:
        stack = stack[1:-1]
    return stack


def _rotations(w):
    for i in range(len(w)):
        yield w[i:] + w[:i]


def _inverse(w):
    return [(n, -e) for n, e in reversed(w)]


def _match_two_letter(w) -> tuple[str, str] | None:
    """Find (M, L) with w cyclically equal to M L M L^-1 up to inversions."""
    if len(w) != 4:
        return None
    for cand in (w, _inverse(w)):
        for r in _rotations(list(cand)):
            (m1, e1), (l1, f1), (m2, e2), (l2, f2) = r
            if m1 == m2 and e1 == e2 and l1 == l2 and f1 == -f2 and m1 != l1:
                return m1, l1
    return None


@dataclass(frozen=True)
class _Quantities:
    lc: LimitClass

    def m1(self, t):
        return math.exp(-t)

    def kappa_id2(self, t):
        return math.exp(-2 * t)

    def kappa_02(self, t):
        return math.exp(-t) * (1 - math.exp(-t))

    def kappa_12(self, t):
        return mnc(2, t, self.lc)

    def power_trace(self, n, t):
        n = abs(n)
        return math.fsum(mnc(d, t, self.lc) for d in range(1, n + 1) if n % d == 0)


def analytic_eval(word: LassoWord, lc: LimitClass | None = None, scale: float = 1.0) -> float:
    """
    Large-N Wilson loop by explicit reduction rules.

    Supported: the empty word, powers of a single face, splitting off faces
    that occur once, and the cyclic pattern M L M L^-1.  Anything else raises
    NotReducible; use mc_wilson instead.
    """
    lc = lc or transposition_limit()
    if not lc.evanescent:
        raise ValidationError("the analytic evaluator needs an evanescent class")
    q = _Quantities(lc)
    area = {k: v * scale for k, v in word.areas.items()}
    return _reduce(list(word.letters), area, q)


def _reduce(w, area, q: _Quantities) -> float:
    w = free_reduce(w)
    if not w:
        return 1.0
    names = [n for n, _ in w]
    if len(set(names)) == 1:
        return q.power_trace(sum(e for _, e in w), area[names[0]])
    counts = {n: names.count(n) for n in names}
    for i, (n, e) in enumerate(w):
        if counts[n] == 1:
            return q.m1(area[n]) * _reduce(w[i + 1:] + w[:i], area, q)
    pair = _match_two_letter(w)
    if pair is not None:
        M, L = pair
        tm, tl = area[M], area[L]
        return q.kappa_id2(tm) + q.kappa_02(tm) * math.exp(-tl) + q.kappa_12(tm) * math.exp(-2 * tl)
    raise NotReducible(f"word {[(n, e) for n, e in w]} is outside the analytic rule set")


# -- arbitration ------------------------------------------------------------------------


@dataclass(frozen=True)
class Arbitration:
    analytic: float
    mc: Estimate
    reference: float | None
    tolerance: float
    agree: bool

    @property
    def flagged(self) -> bool:
        return not self.agree

    def to_json(self) -> dict:
        return {
            "analytic": self.analytic,
            "mc_mean": self.mc.mean,
            "mc_stderr": self.mc.stderr,
            "reference": self.reference,
            "tolerance": self.tolerance,
            "agree": self.agree,
            "flagged": self.flagged,
        }


def arbitrate(word: LassoWord, N: int, samples: int, rng=None, slack: float = 0.02, workers: int = 1, reference: float | None = None) -> Arbitration:
    """Compare the rule-based value with Monte Carlo; disagreement is reported, never hidden."""
    a = analytic_eval(word)
    est = mc_wilson(word, N, samples, rng, workers=workers)
    tol = 4 * est.stderr + slack
    ok = abs(est.mean - a) <= tol
    if reference is not None:
        ok = ok and abs(est.mean - reference) <= tol
    return Arbitration(a, est, reference, tol, ok)


def figure_word(s: float, t: float, u: float) -> LassoWord:
    """The loop a b a^-1 b c with face areas s, t, u."""
    return LassoWord((("a", 1), ("b", 1), ("a", -1), ("b", 1), ("c", 1)), {"a": s, "b": t, "c": u})


def figure_value_alt(s: float, t: float, u: float) -> float:
    """Variant closed form for figure_word with coefficient (1 - t) on the last term."""
    e = math.exp
    return e(-u) * (e(-2 * t) + e(-t - s) - e(-2 * t - s) + e(-2 * t - 2 * s) - t * e(-2 * t - 2 * s))


def figure_value_rules(s: float, t: float, u: float) -> float:
    """The same loop through the reduction rules, expanded by hand."""
    e = math.exp
    return e(-u) * (e(-2 * t) + e(-t - s) - e(-2 * t - s) + t * e(-2 * t - 2 * s))
