"""Maximum-length LFSR key expansion and its known-plaintext collapse.

Conventions: the feedback polynomial ``taps`` is a bit mask including the
``x**width`` term, so ``x^4 + x^3 + 1`` is ``0b11001``.  The Fibonacci register
holds ``s_t .. s_{t+w-1}`` with ``s_t`` in bit 0, emits bit 0, and shifts in
``s_{t+w} = sum_j c_j s_{t+j}``; the first ``width`` output bits therefore
equal the seed bits, least significant first.  The Galois form produces a
sequence obeying the same recurrence.

Seeds are drawn uniformly from the nonzero states unless ``include_zero`` is
set, in which case the all-zero seed is added and every count is a power of two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import SizeGuardError
from . import probcore as pc
from .probcore import BitString, ProbVec

MAX_ENUM_WIDTH = 16
MAX_DENSE_LEN = 20


@dataclass(frozen=True)
class LfsrSpec:
    width: int
    taps: int
    form: str = "fibonacci"

    def __post_init__(self) -> None:
        if self.width < 2:
            raise ValueError(f"width must be >= 2, got {self.width}")
        if self.taps >> self.width != 1:
            raise ValueError(f"taps 0x{self.taps:x} must have degree exactly {self.width}")
        if self.form not in ("fibonacci", "galois"):
            raise ValueError(f"unknown LFSR form {self.form!r}")

    @property
    def feedback_mask(self) -> int:
        return self.taps & ((1 << self.width) - 1)

    @property
    def galois_mask(self) -> int:
        rev = int(format(self.taps, f"0{self.width + 1}b")[::-1], 2)
        return rev >> 1

    @property
    def period_max(self) -> int:
        return (1 << self.width) - 1

    def to_json(self) -> dict:
        return {"width": self.width, "taps": f"0x{self.taps:x}"}

    @classmethod
    def from_json(cls, obj: dict) -> "LfsrSpec":
        taps = obj["taps"]
        taps = int(taps, 16) if isinstance(taps, str) else int(taps)
        return cls(int(obj["width"]), taps, obj.get("form", "fibonacci"))


def _step(spec: LfsrSpec, state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out = state & 1
    if spec.form == "fibonacci":
        fb = np.bitwise_count(state & spec.feedback_mask).astype(np.int64) & 1
        return out, (state >> 1) | (fb << (spec.width - 1))
    return out, (state >> 1) ^ (out * spec.galois_mask)


def keystream_bits(spec: LfsrSpec, seeds, length: int) -> np.ndarray:
    """Output bits for many seeds at once: array of shape ``(len(seeds), length)``."""
    state = np.atleast_1d(np.asarray(seeds, dtype=np.int64)).copy()
    out = np.empty((state.size, length), dtype=np.uint8)
    for t in range(length):
        bit, state = _step(spec, state)
        out[:, t] = bit
    return out


@dataclass(frozen=True, eq=False)
class Keystream:
    spec: LfsrSpec
    seed: BitString
    bits: np.ndarray

    def hex(self) -> str:
        """Bits packed least-significant first into one integer, as hex."""
        return BitString.from_bits(self.bits.tolist()).hex()

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(), "seed": self.seed.hex(), "length": int(self.bits.size),
                "bits": self.hex()}


def generate_keystream(spec: LfsrSpec, seed: BitString | int, length: int,
                       allow_zero: bool = False) -> Keystream:
    if not isinstance(seed, BitString):
        seed = BitString(spec.width, int(seed))
    if seed.length != spec.width:
        raise ValueError(f"seed has {seed.length} bits, register has {spec.width}")
    if seed.value == 0 and not allow_zero:
        raise ValueError("zero seed gives the all-zero stream; refused for max-length operation")
    if length < 1:
        raise ValueError("length must be >= 1")
    bits = keystream_bits(spec, [seed.value], length)[0]
    bits.setflags(write=False)
    return Keystream(spec, seed, bits)


def least_period(bits) -> int:
    """Smallest p with bits[t + p] == bits[t] over the whole sequence (len(bits) if none)."""
    b = np.asarray(bits)
    for p in range(1, b.size):
        if np.array_equal(b[p:], b[:-p]):
            return p
    return b.size


def state_period(spec: LfsrSpec, seed: int) -> int:
    """Steps until the register state first returns to ``seed`` (0 if it never does)."""
    state = np.array([seed], dtype=np.int64)
    for k in range(1, (1 << spec.width) + 1):
        _, state = _step(spec, state)
        if int(state[0]) == seed:
            return k
    return 0


def is_primitive(spec: LfsrSpec) -> bool:
    return state_period(spec, 1) == spec.period_max


def primitive_specs(width: int, form: str = "fibonacci") -> list[LfsrSpec]:
    """All maximum-length feedback polynomials of a given degree, by a vectorized state walk."""
    if width > MAX_ENUM_WIDTH:
        raise SizeGuardError(f"primitive search limited to width <= {MAX_ENUM_WIDTH}")
    lows = np.arange(1, 1 << width, 2, dtype=np.int64)  # constant term required
    masks = lows
    state = np.ones_like(masks)
    first_return = np.zeros_like(masks)
    period = (1 << width) - 1
    for k in range(1, period + 1):
        fb = np.bitwise_count(state & masks).astype(np.int64) & 1
        state = (state >> 1) | (fb << (width - 1))
        hit = (state == 1) & (first_return == 0)
        first_return[hit] = k
    taps = (1 << width) | lows[first_return == period]
    return [LfsrSpec(width, int(t), form) for t in taps]


def _seed_range(spec: LfsrSpec, include_zero: bool) -> np.ndarray:
    if spec.width > MAX_ENUM_WIDTH:
        raise SizeGuardError(f"seed enumeration limited to width <= {MAX_ENUM_WIDTH}")
    return np.arange(0 if include_zero else 1, 1 << spec.width, dtype=np.int64)


def keystream_support(spec: LfsrSpec, length: int, include_zero: bool = False,
                      start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Distinct windows ``bits[start:start+length]`` over all seeds, with their seed counts."""
    seeds = _seed_range(spec, include_zero)
    bits = keystream_bits(spec, seeds, start + length)[:, start:]
    rows, counts = np.unique(bits, axis=0, return_counts=True)
    return rows, counts


def keystream_counts(spec: LfsrSpec, length: int, include_zero: bool = False,
                     start: int = 0) -> np.ndarray:
    """Seed counts for every ``length``-bit window value (bit ``i`` is keystream bit ``start + i``)."""
    if length > MAX_DENSE_LEN:
        raise SizeGuardError(f"dense keystream distribution limited to length <= {MAX_DENSE_LEN}")
    seeds = _seed_range(spec, include_zero)
    bits = keystream_bits(spec, seeds, start + length)[:, start:].astype(np.int64)
    idx = bits @ (1 << np.arange(length, dtype=np.int64))
    return np.bincount(idx, minlength=1 << length)


def keystream_distribution(spec: LfsrSpec, length: int, include_zero: bool = False,
                           exact: bool = False, start: int = 0) -> ProbVec:
    """Exact distribution of ``length`` consecutive keystream bits under a uniform seed."""
    counts = keystream_counts(spec, length, include_zero, start)
    total = int(counts.sum())
    if exact:
        return ProbVec(length, [Fraction(int(c), total) for c in counts])
    return ProbVec(length, counts / total)


def run_guess_prob(spec: LfsrSpec, start: int, length: int, include_zero: bool = False) -> Fraction:
    """Exact whole-window guessing probability for a consecutive run of keystream bits."""
    _, counts = keystream_support(spec, length, include_zero, start)
    return Fraction(int(counts.max()), int(counts.sum()))


def support_entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p))) + 0.0


# -- known-plaintext attack -------------------------------------------------------

@dataclass(frozen=True)
class KpaInstance:
    positions: tuple
    bits: tuple

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        bits = tuple(int(b) for b in self.bits)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "bits", bits)
        if len(pos) != len(bits):
            raise ValueError("positions and bits differ in length")
        if len(set(pos)) != len(pos) or any(p < 0 for p in pos):
            raise ValueError("positions must be distinct and nonnegative")
        if any(b not in (0, 1) for b in bits):
            raise ValueError("known bits must be 0/1")

    @classmethod
    def consecutive(cls, stream: Keystream, start: int, m: int) -> "KpaInstance":
        pos = tuple(range(start, start + m))
        return cls(pos, tuple(int(stream.bits[p]) for p in pos))

    def to_json(self) -> dict:
        return {"positions": list(self.positions), "bits": list(self.bits)}

    @classmethod
    def from_json(cls, obj: dict) -> "KpaInstance":
        return cls(tuple(obj["positions"]), tuple(obj["bits"]))


@dataclass(frozen=True)
class KpaSolution:
    """Affine solution space ``particular + span(basis)`` of seeds matching the known bits."""

    consistent: bool
    dimension: int
    particular: int
    basis: tuple
    seeds: tuple
    include_zero: bool

    @property
    def unique(self) -> bool:
        return len(self.seeds) == 1

    def to_json(self) -> dict:
        return {"consistent": self.consistent, "dimension": self.dimension,
                "count": len(self.seeds), "seeds": [f"0x{s:x}" for s in self.seeds[:64]]}


def linear_rows(spec: LfsrSpec, length: int) -> list[int]:
    """Row ``t`` is the seed mask whose parity gives keystream bit ``t``."""
    units = [1 << j for j in range(spec.width)]
    bits = keystream_bits(spec, units, length)
    weights = (1 << np.arange(spec.width, dtype=np.int64))
    return [int(v) for v in weights @ bits.astype(np.int64)]


def kpa_recover_seed(spec: LfsrSpec, kpa: KpaInstance, include_zero: bool = False,
                     max_enumerate: int = 16) -> KpaSolution:
    """Solve the GF(2) system expressing each known keystream bit in the seed bits."""
    w = spec.width
    horizon = max(kpa.positions, default=-1) + 1
    rows_all = linear_rows(spec, horizon) if horizon else []
    rows = [rows_all[p] | (b << w) for p, b in zip(kpa.positions, kpa.bits)]

    pivots: list[tuple[int, int]] = []
    for r in rows:
        for col, pr in pivots:
            if r >> col & 1:
                r ^= pr
        low = r & ((1 << w) - 1)
        if low == 0:
            if r >> w & 1:
                return KpaSolution(False, -1, 0, (), (), include_zero)
            continue
        col = low.bit_length() - 1
        pivots = [(c, p ^ r if p >> col & 1 else p) for c, p in pivots]
        pivots.append((col, r))

    pivot_cols = {c for c, _ in pivots}
    particular = 0
    for col, pr in pivots:
        if pr >> w & 1:
            particular |= 1 << col
    free = [j for j in range(w) if j not in pivot_cols]
    basis = []
    for f in free:
        v = 1 << f
        for col, pr in pivots:
            if pr >> f & 1:
                v |= 1 << col
        basis.append(v)
    dim = len(basis)
    seeds: tuple = ()
    if dim <= max_enumerate:
        sols = []
        for combo in range(1 << dim):
            s = particular
            for i, b in enumerate(basis):
                if combo >> i & 1:
                    s ^= b
            if s or include_zero:
                sols.append(s)
        seeds = tuple(sorted(sols))
    return KpaSolution(True, dim, particular, tuple(basis), seeds, include_zero)


def exhaustive_seed_search(spec: LfsrSpec, kpa: KpaInstance, include_zero: bool = False) -> tuple:
    """Brute-force oracle: every seed whose simulated stream matches the known bits."""
    seeds = _seed_range(spec, include_zero)
    if not kpa.positions:
        return tuple(int(s) for s in seeds)
    horizon = max(kpa.positions) + 1
    bits = keystream_bits(spec, seeds, horizon)
    ok = np.all(bits[:, list(kpa.positions)] == np.array(kpa.bits, dtype=np.uint8), axis=1)
    return tuple(int(s) for s in seeds[ok])


# -- entropy ceiling ----------------------------------------------------------------

def shannon_limit_check(spec: LfsrSpec, length: int, include_zero: bool = False) -> dict:
    """Entropy of ``length`` keystream bits against the seed-size ceiling.

    Also reports the implied floor ``1 - width/length`` on Eve's information per bit.
    """
    _, counts = keystream_support(spec, length, include_zero)
    h = support_entropy(counts)
    n_seeds = int(counts.sum())
    ideal_gap = math.log2((1 << spec.width) / n_seeds)
    return {
        "width": spec.width,
        "length": length,
        "include_zero": include_zero,
        "distinct_sequences": int(counts.size),
        "entropy": h,
        "entropy_ceiling": float(spec.width),
        "ceiling_holds": h <= spec.width + 1e-12,
        "ceiling_gap": spec.width - h,
        "zero_seed_gap": ideal_gap,
        "info_per_bit": 1.0 - h / length,
        "info_per_bit_floor": 1.0 - spec.width / length,
        "floor_holds": 1.0 - h / length >= 1.0 - spec.width / length - 1e-12,
        "p1": float(Fraction(int(counts.max()), n_seeds)),
    }
