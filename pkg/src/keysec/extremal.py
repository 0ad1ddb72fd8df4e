"""Extremal adversary distributions and a structured worst-case search.

The spike family puts mass ``p1`` on one key and spreads the rest evenly; it
attains the whole-key guessing figures allowed by an information-per-bit or a
statistical-distance budget.  The parity extension appends a bit that is a
known function of the others, giving a linear partial-key leak at
information-per-bit ``1/(n+1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np

from . import SizeGuardError
from . import probcore as pc
from .probcore import ProbVec, SubsetMask

MAX_SEARCH_BITS = 12


@dataclass(frozen=True)
class SpikeDist:
    """Mass ``p1`` on key ``position`` (default 0) and ``(1 - p1)/(N - 1)`` on every other key."""

    n: int
    p1: Fraction
    position: int = 0

    def __post_init__(self) -> None:
        p1 = Fraction(self.p1)
        object.__setattr__(self, "p1", p1)
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not Fraction(1, self.N) <= p1 <= 1:
            raise ValueError(f"spike mass {p1} must lie in [1/N, 1]")
        if not 0 <= self.position < self.N:
            raise ValueError(f"spike position {self.position} out of range")

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def tail(self) -> Fraction:
        return (1 - self.p1) / (self.N - 1)

    def probvec(self, exact: bool = False) -> ProbVec:
        if self.n > 24:
            raise SizeGuardError(f"dense vector over 2**{self.n} keys refused")
        if exact:
            vals = [self.tail] * self.N
            vals[self.position] = self.p1
            return ProbVec(self.n, vals)
        arr = np.full(self.N, float(self.tail))
        arr[self.position] = float(self.p1)
        return ProbVec(self.n, arr)

    def entropy(self) -> float:
        """Closed-form entropy in bits; usable for any n, including n far beyond enumeration."""
        p1 = float(self.p1)
        h = 0.0
        if 0 < p1 < 1:
            h -= p1 * math.log2(p1)
        if p1 < 1:
            q = 1.0 - p1
            # log2(N - 1) without forming N for large n
            log2_nm1 = self.n + math.log1p(-(2.0 ** -self.n)) / math.log(2)
            h -= q * (math.log2(q) - log2_nm1)
        return h

    def info_per_bit(self) -> float:
        return 1.0 - self.entropy() / self.n

    def delta(self) -> Fraction:
        """Statistical distance to uniform, ``p1 - 1/N`` for a spike above uniform."""
        return self.p1 - Fraction(1, self.N)


def theorem1_dist(n: int, l: int) -> SpikeDist:
    """Spike distribution with whole-key guessing probability ``2**-l``."""
    if l < 0 or l > n:
        raise ValueError(f"need 0 <= l <= n so that 2**-l >= 2**-n; got n={n}, l={l}")
    return SpikeDist(n, Fraction(1, 1 << l))


@dataclass(frozen=True)
class Theorem1Check:
    n: int
    l: int
    p1: object
    info_per_bit: object
    p1_lower_bound: Fraction
    info_ok: bool
    p1_ok: bool

    @property
    def ok(self) -> bool:
        return self.info_ok and self.p1_ok


def theorem1_check(n: int, l: int, exact: bool = True, tol: float = 0.0) -> Theorem1Check:
    """Evaluate both sides of the whole-key bound on the constructed distribution.

    Checks ``I_E/n <= 2**-l`` and ``p1 >= 2**-l - 1/(n 2**n)`` using the
    probcore metrics on the dense vector.
    """
    dist = theorem1_dist(n, l).probvec(exact=exact)
    budget = Fraction(1, 1 << l)
    lower = budget - Fraction(1, n * (1 << n))
    info = pc.mutual_info_per_bit(dist)
    p1 = pc.guess_prob_whole(dist)
    if exact:
        with mpmath.workdps(pc.MP_DPS):
            info_ok = bool(pc._exact_to_mp(info) <= pc._exact_to_mp(budget) + tol)
        p1_ok = p1 >= lower
    else:
        info_ok = info <= float(budget) + tol
        p1_ok = p1 >= float(lower) - tol
    return Theorem1Check(n, l, p1, info, lower, info_ok, p1_ok)


def theorem2_dist(n: int, l: Optional[int]) -> SpikeDist:
    """Spike with ``p1 = 2**-l + 1/N``, whose distance to uniform is exactly ``2**-l``.

    ``l=None`` is the limit ``l -> inf``: the uniform distribution.
    """
    N = 1 << n
    excess = Fraction(0) if l is None else Fraction(1, 1 << l)
    if l is not None and l < 0:
        raise ValueError("l must be nonnegative")
    if excess + Fraction(1, N) > 1:
        raise ValueError(f"2**-{l} + 2**-{n} exceeds 1")
    return SpikeDist(n, excess + Fraction(1, N))


@dataclass(frozen=True, eq=False)
class ParityExtension:
    """Boolean function ``f`` on ``base_n`` bits, given by its truth table, used as an extra key bit."""

    base_n: int
    table: np.ndarray = field(default=None)

    def __post_init__(self) -> None:
        if self.base_n < 1:
            raise ValueError("base_n must be >= 1")
        table = self.table
        if table is None:
            keys = np.arange(1 << self.base_n)
            table = np.array([bin(k).count("1") & 1 for k in keys])
        table = np.asarray(table, dtype=np.int64)
        if table.shape != (1 << self.base_n,) or np.any((table != 0) & (table != 1)):
            raise ValueError("truth table must hold 2**base_n entries in {0, 1}")
        object.__setattr__(self, "table", table)

    @classmethod
    def xor(cls, n: int) -> "ParityExtension":
        return cls(n)

    @classmethod
    def copy_bit(cls, n: int, bit: int = 0) -> "ParityExtension":
        keys = np.arange(1 << n)
        return cls(n, (keys >> bit) & 1)

    @classmethod
    def constant(cls, n: int, value: int = 0) -> "ParityExtension":
        return cls(n, np.full(1 << n, value))


def theorem3_dist(ext: ParityExtension, exact: bool = True) -> ProbVec:
    """Uniform over the 2**n keys of length n+1 whose top bit (position n) equals f(low n bits)."""
    n = ext.base_n
    N = 1 << (n + 1)
    support = np.arange(1 << n) | (ext.table << n)
    if exact:
        vals = [Fraction(0)] * N
        for k in support.tolist():
            vals[k] = Fraction(1, 1 << n)
        return ProbVec(n + 1, vals)
    arr = np.zeros(N)
    arr[support] = 2.0 ** -n
    return ProbVec(n + 1, arr)


# -- structured worst-case search ------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    """Maximize a guessing probability over the subcube family subject to a criterion budget.

    The family places mass ``a`` on key 0, mass ``(1-a) t`` uniformly on the
    other keys whose masked bits are all zero, and the remainder uniformly on
    all keys outside that subcube.
    """

    n: int
    constraint: str
    eps: float
    objective: str = "whole"
    mask: Optional[SubsetMask] = None
    iterations: int = 50
    seed: int = 0
    restarts: int = 4
    grid: int = 101

    def __post_init__(self) -> None:
        if self.constraint not in ("I_E", "delta_E"):
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.objective not in ("whole", "subset"):
            raise ValueError(f"unknown objective {self.objective!r}")
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not 1 <= self.n <= MAX_SEARCH_BITS:
            raise SizeGuardError(f"search limited to n <= {MAX_SEARCH_BITS}, got {self.n}")
        if self.objective == "subset" and self.mask is None:
            raise ValueError("subset objective needs a mask")
        if self.mask is not None and self.mask.n != self.n:
            raise ValueError("mask length does not match n")

    def params(self) -> dict:
        return {
            "n": self.n, "constraint": self.constraint, "eps": self.eps,
            "objective": self.objective,
            "mask": None if self.mask is None else list(self.mask.positions),
            "iterations": self.iterations, "seed": self.seed, "restarts": self.restarts,
        }


class _Family:
    def __init__(self, cfg: SearchConfig):
        self.cfg = cfg
        self.n = cfg.n
        self.N = 1 << cfg.n
        mask = cfg.mask if cfg.mask is not None else SubsetMask.full(cfg.n)
        self.mask = mask
        self.m = mask.m
        self.S = 1 << (cfg.n - self.m)
        self.sizes = np.array([1, self.S - 1, self.N - self.S], dtype=float)
        self.t_free = self.S > 1

    def masses(self, a: float, t: float) -> np.ndarray:
        """Per-key masses of the three groups (spike, rest of subcube, outside)."""
        rest = 1.0 - a
        b = rest * t / (self.S - 1) if self.S > 1 else 0.0
        outside = rest * (1.0 - t) if self.S > 1 else rest
        c = outside / (self.N - self.S) if self.N > self.S else 0.0
        return np.array([a, b, c])

    def constraint(self, x: np.ndarray) -> float:
        sizes, u = self.sizes, 1.0 / self.N
        if self.cfg.constraint == "delta_E":
            return 0.5 * float(np.sum(sizes * np.abs(x - u)))
        nz = x > 0
        h = -float(np.sum(sizes[nz] * x[nz] * np.log2(x[nz])))
        return 1.0 - h / self.n

    def objective(self, x: np.ndarray) -> float:
        if self.cfg.objective == "whole":
            return float(np.max(x[self.sizes > 0]))
        inside = x[0] + (self.S - 1) * x[1]
        if self.m == 0 or (1 << self.m) == 1:
            return inside
        other = (self.N - self.S) * x[2] / ((1 << self.m) - 1)
        return max(inside, other)

    def valid(self, a: float, t: float) -> bool:
        if not (0 <= a <= 1 and 0 <= t <= 1):
            return False
        if not self.t_free and t != 0:
            return False
        return True

    def uniform_point(self) -> tuple[float, float]:
        a = 1.0 / self.N
        t = (self.S - 1) / (self.N - 1) if self.t_free else 0.0
        return a, t

    def probvec(self, a: float, t: float) -> ProbVec:
        x = self.masses(a, t)
        inside = self.mask.index_map() == 0
        arr = np.where(inside, x[1], x[2])
        arr[0] = x[0]
        return ProbVec(self.n, arr / arr.sum())


@dataclass(frozen=True)
class SearchResult:
    found: bool
    dist: Optional[ProbVec]
    objective_value: float
    constraint_value: float
    params: tuple
    seed: int
    reason: str = ""

    def certificate(self) -> dict:
        return {
            "dist": None if self.dist is None else self.dist.to_json(),
            "constraint_value": self.constraint_value,
            "objective_value": self.objective_value,
        }


def _bisect_edge(feasible, inside: float, outside: float, steps: int = 80) -> float:
    """Last feasible point on the segment from a feasible ``inside`` towards ``outside``."""
    if feasible(outside):
        return outside
    lo, hi = inside, outside
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _coordinate_ascent(fam: _Family, a: float, t: float, iterations: int) -> tuple[float, float, float]:
    eps = fam.cfg.eps

    def score(a_, t_):
        return fam.objective(fam.masses(a_, t_))

    def ok(a_, t_):
        return fam.valid(a_, t_) and fam.constraint(fam.masses(a_, t_)) <= eps

    best = score(a, t)
    for _ in range(iterations):
        improved = False
        # objective is a max of affine maps along each coordinate, so endpoints suffice
        lo = _bisect_edge(lambda v: ok(v, t), a, 0.0)
        hi = _bisect_edge(lambda v: ok(v, t), a, 1.0)
        for cand in (lo, hi):
            s = score(cand, t)
            if s > best + 1e-15:
                a, best, improved = cand, s, True
        if fam.t_free:
            lo = _bisect_edge(lambda v: ok(a, v), t, 0.0)
            hi = _bisect_edge(lambda v: ok(a, v), t, 1.0)
            for cand in (lo, hi):
                s = score(a, cand)
                if s > best + 1e-15:
                    t, best, improved = cand, s, True
        if not improved:
            break
    return a, t, best


def _grid_start(fam: _Family, size: int) -> tuple[float, float, float] | None:
    eps = fam.cfg.eps
    best = None
    ts = np.linspace(0.0, 1.0, size) if fam.t_free else np.array([0.0])
    for a in np.linspace(0.0, 1.0, size):
        for t in ts:
            if not fam.valid(a, t):
                continue
            x = fam.masses(a, t)
            if fam.constraint(x) <= eps:
                s = fam.objective(x)
                if best is None or s > best[2]:
                    best = (float(a), float(t), s)
    return best


def subset_leak_search(cfg: SearchConfig) -> SearchResult:
    """Deterministic restarted coordinate ascent over the subcube family.

    Restart ``r`` draws its starting point with seed ``cfg.seed + r``; restart 0
    starts from the uniform distribution, which is always feasible.  For
    ``n <= 8`` a grid scan seeds one extra ascent.  The winner is the largest
    objective, lowest seed on ties, and is re-verified with probcore.
    """
    fam = _Family(cfg)
    u_a, u_t = fam.uniform_point()

    def ok(a_, t_):
        return fam.valid(a_, t_) and fam.constraint(fam.masses(a_, t_)) <= cfg.eps

    if not ok(u_a, u_t):
        return SearchResult(False, None, float("nan"), float("nan"), (), cfg.seed,
                            "no feasible point in the family")
    runs = []
    for r in range(cfg.restarts):
        seed = cfg.seed + r
        if r == 0:
            a0, t0 = u_a, u_t
        else:
            rng = np.random.default_rng(seed)
            a0 = float(rng.uniform())
            t0 = float(rng.uniform()) if fam.t_free else 0.0
            if not ok(a0, t0):
                lam = _bisect_edge(lambda s: ok(u_a + s * (a0 - u_a), u_t + s * (t0 - u_t)), 0.0, 1.0)
                a0, t0 = u_a + lam * (a0 - u_a), u_t + lam * (t0 - u_t)
        runs.append((seed, *_coordinate_ascent(fam, a0, t0, cfg.iterations)))
    if cfg.n <= 8:
        g = _grid_start(fam, cfg.grid)
        if g is not None:
            runs.append((cfg.seed + cfg.restarts, *_coordinate_ascent(fam, g[0], g[1], cfg.iterations)))
    seed, a, t, _ = max(runs, key=lambda r: (r[3], -r[0]))

    dist = fam.probvec(a, t)
    result = _evaluate(cfg, dist, (a, t), seed)
    if not verify_certificate(result.certificate(), cfg):
        return SearchResult(False, dist, result.objective_value, result.constraint_value,
                            (a, t), seed, "certificate failed re-verification")
    return result


def _constraint_value(cfg: SearchConfig, d: ProbVec) -> float:
    if cfg.constraint == "I_E":
        return float(pc.mutual_info_per_bit(d))
    return float(pc.stat_distance_to_uniform(d))


def _objective_value(cfg: SearchConfig, d: ProbVec) -> float:
    if cfg.objective == "whole":
        return float(pc.guess_prob_whole(d))
    return float(pc.guess_prob_subset(d, cfg.mask))


def _evaluate(cfg: SearchConfig, d: ProbVec, params: tuple, seed: int) -> SearchResult:
    return SearchResult(True, d, _objective_value(cfg, d), _constraint_value(cfg, d), params, seed)


def verify_certificate(cert: dict, cfg: SearchConfig, tol: float = 1e-12) -> bool:
    """Recompute both metrics of a certificate from its distribution alone."""
    if cert.get("dist") is None:
        return False
    d = ProbVec.from_json(cert["dist"])
    c = _constraint_value(cfg, d)
    o = _objective_value(cfg, d)
    return (c <= cfg.eps + tol
            and abs(c - cert["constraint_value"]) <= tol
            and abs(o - cert["objective_value"]) <= tol)
