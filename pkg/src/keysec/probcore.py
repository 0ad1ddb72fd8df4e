"""Exact finite probability machinery over the 2**n values of an n-bit key.

Distributions are dense vectors indexed by the integer key value; bit ``i`` of a
key ``k`` is ``(k >> i) & 1``.  Every function accepts two storage modes:

* float mode: ``float64`` arrays, normalized to within ``NORM_TOL``;
* exact mode: object arrays of :class:`fractions.Fraction`, normalized exactly.

In exact mode entropies are returned as a ``Fraction`` whenever every mass is
a power of two (the logarithms are then integers) and as an ``mpmath.mpf``
evaluated at ``MP_DPS`` digits otherwise.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Iterable, Sequence

import mpmath
import numpy as np

NORM_TOL = 1e-12
LOAD_TOL = 1e-9
MP_DPS = 50


@dataclass(frozen=True)
class BitString:
    """An unsigned integer together with its bit length (bit 0 is the least significant)."""

    length: int
    value: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"bit length must be >= 1, got {self.length}")
        if not 0 <= self.value < (1 << self.length):
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "BitString":
        value = 0
        for i, b in enumerate(bits):
            if b not in (0, 1):
                raise ValueError(f"bits must be 0/1, got {b!r}")
            value |= int(b) << i
        return cls(len(bits), value)

    def bits(self) -> list[int]:
        return [(self.value >> i) & 1 for i in range(self.length)]

    def hex(self) -> str:
        return f"0x{self.value:0{(self.length + 3) // 4}x}"


def _is_exact_seq(values: Iterable[Any]) -> bool:
    return all(isinstance(v, (Fraction, int)) and not isinstance(v, bool) for v in values)


def _to_storage(p: Any) -> np.ndarray:
    if isinstance(p, np.ndarray) and p.dtype != object:
        arr = np.array(p, dtype=np.float64)
        arr.setflags(write=False)
        return arr
    values = list(p)
    if values and _is_exact_seq(values):
        arr = np.empty(len(values), dtype=object)
        arr[:] = [Fraction(v) for v in values]
        return arr
    arr = np.array([float(v) for v in values], dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _total(p: np.ndarray):
    if p.dtype == object:
        return sum(p, Fraction(0))
    return float(np.sum(p))


@dataclass(frozen=True, eq=False)
class ProbVec:
    """Probability vector over the 2**n values of an n-bit key."""

    n: int
    p: np.ndarray

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"key length must be >= 1, got {self.n}")
        p = _to_storage(self.p)
        object.__setattr__(self, "p", p)
        if p.shape != (1 << self.n,):
            raise ValueError(f"expected {1 << self.n} entries for n={self.n}, got {p.shape[0]}")
        if self.exact:
            if any(v < 0 for v in p):
                raise ValueError("probabilities must be nonnegative")
            if _total(p) != 1:
                raise ValueError(f"exact probabilities sum to {_total(p)}, not 1")
        else:
            if not np.all(np.isfinite(p)) or np.any(p < 0):
                raise ValueError("probabilities must be finite and nonnegative")
            if abs(_total(p) - 1.0) > NORM_TOL:
                raise ValueError(f"probabilities sum to {_total(p)!r}, outside {NORM_TOL} of 1")

    @property
    def exact(self) -> bool:
        return self.p.dtype == object

    @property
    def N(self) -> int:
        return 1 << self.n

    @classmethod
    def uniform(cls, n: int, exact: bool = False) -> "ProbVec":
        N = 1 << n
        if exact:
            return cls(n, [Fraction(1, N)] * N)
        return cls(n, np.full(N, 1.0 / N))

    @classmethod
    def point(cls, n: int, k: int, exact: bool = False) -> "ProbVec":
        N = 1 << n
        if not 0 <= k < N:
            raise ValueError(f"key {k} out of range for n={n}")
        if exact:
            vals = [Fraction(0)] * N
            vals[k] = Fraction(1)
            return cls(n, vals)
        arr = np.zeros(N)
        arr[k] = 1.0
        return cls(n, arr)

    def max(self):
        return max(self.p) if self.exact else float(np.max(self.p))

    def mode(self) -> tuple[int, Any]:
        # ties -> lowest key value
        if self.exact:
            best = max(self.p)
            k = next(i for i, v in enumerate(self.p) if v == best)
            return k, best
        k = int(np.argmax(self.p))
        return k, float(self.p[k])

    def to_float(self) -> "ProbVec":
        if not self.exact:
            return self
        return ProbVec(self.n, np.array([float(v) for v in self.p]))

    def to_json(self) -> dict:
        return {"n": self.n, "p": [float(v) for v in self.p]}

    @classmethod
    def from_json(cls, obj: dict, tol: float = LOAD_TOL) -> "ProbVec":
        n = int(obj["n"])
        return cls(n, _renormalize(obj["p"], tol))


def _renormalize(values: Sequence[float], tol: float) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValueError("probabilities must be finite and nonnegative")
    total = float(arr.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"probabilities sum to {total!r}, outside {tol} of 1")
    return arr / total


@dataclass(frozen=True, eq=False)
class Cpd:
    """Eve's conditional distributions on the key, one per observation, with observation weights."""

    n: int
    outcomes: tuple

    def __post_init__(self) -> None:
        outs = tuple((w if isinstance(w, Fraction) else float(w), d) for w, d in self.outcomes)
        object.__setattr__(self, "outcomes", outs)
        if not outs:
            raise ValueError("a Cpd needs at least one outcome")
        for w, d in outs:
            if d.n != self.n:
                raise ValueError(f"outcome distribution has n={d.n}, expected {self.n}")
            if w < 0:
                raise ValueError("outcome weights must be nonnegative")
        total = sum((w for w, _ in outs), Fraction(0) if self.exact else 0.0)
        if self.exact:
            if total != 1:
                raise ValueError(f"exact weights sum to {total}, not 1")
        elif abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"weights sum to {total!r}, outside {NORM_TOL} of 1")

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) and d.exact for w, d in self.outcomes)

    @classmethod
    def single(cls, d: ProbVec) -> "Cpd":
        return cls(d.n, ((Fraction(1) if d.exact else 1.0, d),))

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "outcomes": [{"w": float(w), "p": [float(v) for v in d.p]} for w, d in self.outcomes],
        }

    @classmethod
    def from_json(cls, obj: dict, tol: float = LOAD_TOL) -> "Cpd":
        n = int(obj["n"])
        weights = _renormalize([o["w"] for o in obj["outcomes"]], tol)
        return cls(n, tuple((float(w), ProbVec(n, _renormalize(o["p"], tol)))
                            for w, o in zip(weights, obj["outcomes"])))


def load_distribution(obj: dict) -> ProbVec | Cpd:
    """Parse either the ``{"n", "p"}`` or the ``{"n", "outcomes"}`` JSON shape."""
    if "outcomes" in obj:
        return Cpd.from_json(obj)
    return ProbVec.from_json(obj)


def _as_cpd(c: ProbVec | Cpd) -> Cpd:
    return Cpd.single(c) if isinstance(c, ProbVec) else c


# -- entropy and information --------------------------------------------------

def _log2_exact(x: Fraction):
    num, den = x.numerator, x.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return Fraction(num.bit_length() - den.bit_length())
    return mpmath.log(mpmath.mpf(num) / den, 2)


def _entropy_exact(values: Iterable[Fraction]):
    rational = Fraction(0)
    irrational = mpmath.mpf(0)
    touched = False
    with mpmath.workdps(MP_DPS):
        for v, count in Counter(v for v in values if v > 0).items():
            lg = _log2_exact(v)
            if isinstance(lg, Fraction):
                rational -= count * v * lg
            else:
                touched = True
                irrational -= count * (mpmath.mpf(v.numerator) / v.denominator) * lg
        if touched:
            return irrational + mpmath.mpf(rational.numerator) / rational.denominator
    return rational


def shannon_entropy(d: ProbVec):
    """Shannon entropy in bits, with 0 log 0 = 0."""
    if d.exact:
        return _entropy_exact(d.p)
    p = d.p[d.p > 0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def _exact_to_mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return x


def mutual_info_per_bit(c: ProbVec | Cpd):
    """Eve's information per key bit, ``1 - H(K|Y)/n``, under a uniform prior on the key."""
    c = _as_cpd(c)
    if c.exact:
        acc = Fraction(0)
        mp_part = None
        for w, d in c.outcomes:
            h = shannon_entropy(d)
            if isinstance(h, Fraction):
                acc += w * h
            else:
                with mpmath.workdps(MP_DPS):
                    term = _exact_to_mp(w) * h
                    mp_part = term if mp_part is None else mp_part + term
        if mp_part is None:
            return (c.n - acc) / c.n
        with mpmath.workdps(MP_DPS):
            return (c.n - _exact_to_mp(acc) - mp_part) / c.n
    cond = sum(float(w) * shannon_entropy(d) for w, d in c.outcomes)
    return (c.n - cond) / c.n


# -- distances ------------------------------------------------------------------

def stat_distance(p: ProbVec, q: ProbVec):
    """Total-variation distance ``(1/2) sum |p_i - q_i|``."""
    if p.n != q.n:
        raise ValueError(f"dimension mismatch: n={p.n} vs n={q.n}")
    if p.exact and q.exact:
        return sum((abs(a - b) for a, b in zip(p.p, q.p)), Fraction(0)) / 2
    a = p.to_float().p
    b = q.to_float().p
    return 0.5 * float(np.sum(np.abs(a - b)))


def stat_distance_to_uniform(d: ProbVec):
    return stat_distance(d, ProbVec.uniform(d.n, exact=d.exact))


# -- guessing -------------------------------------------------------------------

def guess_prob_whole(c: ProbVec | Cpd):
    """Probability that Eve names the whole key, guessing the mode for each observation."""
    c = _as_cpd(c)
    if c.exact:
        return sum((w * d.max() for w, d in c.outcomes), Fraction(0))
    return float(sum(float(w) * d.to_float().max() for w, d in c.outcomes))


@dataclass(frozen=True)
class SubsetMask:
    """An ordered set of bit positions of an n-bit key."""

    n: int
    positions: tuple

    def __post_init__(self) -> None:
        pos = tuple(int(i) for i in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(set(pos)) != len(pos):
            raise ValueError(f"mask positions must be distinct: {pos}")
        if any(not 0 <= i < self.n for i in pos):
            raise ValueError(f"mask positions must lie in [0, {self.n}): {pos}")
        if not pos:
            raise ValueError("mask must select at least one bit")

    @property
    def m(self) -> int:
        return len(self.positions)

    @classmethod
    def full(cls, n: int) -> "SubsetMask":
        return cls(n, tuple(range(n)))

    @classmethod
    def run(cls, n: int, start: int, length: int) -> "SubsetMask":
        return cls(n, tuple(range(start, start + length)))

    @classmethod
    def random(cls, n: int, m: int, rng: np.random.Generator) -> "SubsetMask":
        return cls(n, tuple(sorted(rng.choice(n, size=m, replace=False).tolist())))

    def index_map(self) -> np.ndarray:
        """Subset value (bits packed in mask order) for every key value."""
        keys = np.arange(1 << self.n, dtype=np.int64)
        out = np.zeros_like(keys)
        for j, pos in enumerate(self.positions):
            out |= ((keys >> pos) & 1) << j
        return out


def _pushforward(p: np.ndarray, idx: np.ndarray, size: int) -> np.ndarray | list:
    if p.dtype == object:
        acc = [Fraction(0)] * size
        for v, j in zip(p, idx.tolist()):
            acc[j] += v
        return acc
    return np.bincount(idx, weights=p, minlength=size)


def subset_marginal(d: ProbVec, mask: SubsetMask) -> ProbVec:
    if mask.n != d.n:
        raise ValueError(f"mask is for n={mask.n}, distribution has n={d.n}")
    return ProbVec(mask.m, _pushforward(d.p, mask.index_map(), 1 << mask.m))


def guess_prob_subset(c: ProbVec | Cpd, mask: SubsetMask):
    c = _as_cpd(c)
    if c.exact:
        return sum((w * subset_marginal(d, mask).max() for w, d in c.outcomes), Fraction(0))
    return float(sum(float(w) * subset_marginal(d.to_float(), mask).max() for w, d in c.outcomes))


# -- privacy amplification --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PaMap:
    """A public compression map from ``in_bits`` to ``out_bits`` given as a full lookup table."""

    in_bits: int
    out_bits: int
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=np.int64)
        object.__setattr__(self, "table", table)
        if self.out_bits < 1 or self.out_bits > self.in_bits:
            raise ValueError(f"need 1 <= out_bits <= in_bits, got {self.out_bits}, {self.in_bits}")
        if table.shape != (1 << self.in_bits,):
            raise ValueError(f"table must have {1 << self.in_bits} entries")
        if np.any(table < 0) or np.any(table >= (1 << self.out_bits)):
            raise ValueError("table values out of range")
        if np.unique(table).size != (1 << self.out_bits):
            raise ValueError("privacy-amplification map is not surjective")

    @classmethod
    def linear(cls, matrix) -> "PaMap":
        """Map ``k -> M k`` over GF(2); row ``i`` of ``M`` produces output bit ``i``."""
        M = np.asarray(matrix, dtype=np.int64) & 1
        out_bits, in_bits = M.shape
        keys = np.arange(1 << in_bits, dtype=np.int64)
        bits = (keys[:, None] >> np.arange(in_bits)) & 1
        out_vecs = (bits @ M.T) & 1
        table = out_vecs @ (1 << np.arange(out_bits))
        return cls(in_bits, out_bits, table)

    @classmethod
    def identity(cls, n: int) -> "PaMap":
        return cls(n, n, np.arange(1 << n))

    @classmethod
    def xor_all(cls, n: int) -> "PaMap":
        return cls.linear(np.ones((1, n), dtype=np.int64))


def apply_pa(d: ProbVec, f: PaMap) -> ProbVec:
    """Distribution of ``f(K)`` when ``K ~ d``."""
    if f.in_bits != d.n:
        raise ValueError(f"map expects {f.in_bits} input bits, distribution has n={d.n}")
    return ProbVec(f.out_bits, _pushforward(d.p, f.table, 1 << f.out_bits))


# -- partial key leakage ----------------------------------------------------------

def bit_prediction_score(d: ProbVec, position: int, worst_case: bool = False):
    """Success probability of predicting bit ``position`` from all the other bits.

    The average-case score is ``sum_rest max_b p(rest, k_i = b)``.  With
    ``worst_case=True`` it is the largest conditional ``max_b P(k_i = b | rest)``
    over rest values of positive probability.
    """
    if d.n < 2:
        raise ValueError("bit prediction needs n >= 2")
    if not 0 <= position < d.n:
        raise ValueError(f"position {position} out of range for n={d.n}")
    keys = np.arange(d.N, dtype=np.int64)
    k0 = keys[((keys >> position) & 1) == 0]
    p0, p1 = d.p[k0], d.p[k0 | (1 << position)]
    if worst_case:
        return max(max(a, b) / (a + b) for a, b in zip(p0, p1) if a + b > 0)
    if d.exact:
        return sum((max(a, b) for a, b in zip(p0, p1)), Fraction(0))
    return float(np.sum(np.maximum(p0, p1)))


def bit_prediction_advantage(d: ProbVec, worst_case: bool = False) -> tuple[int, Any]:
    """Best ``(position, probability)`` over all bit positions; ties go to the lowest position."""
    scores = [bit_prediction_score(d, i, worst_case) for i in range(d.n)] if d.n >= 2 else None
    if scores is None:
        raise ValueError("bit prediction needs n >= 2")
    best = max(scores)
    return scores.index(best), best


def metric_record(metric: str, value, params: dict | None = None) -> dict:
    """JSON record ``{"metric", "value", "params"}`` used by every metric output."""
    return {"metric": metric, "value": float(value), "params": dict(params or {})}
