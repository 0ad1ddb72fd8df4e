"""The fourteen acceptance checks, each a function returning a :class:`CheckResult`.

Used by ``tests/test_acceptance.py`` and by the ``repro`` subcommand.  Every
check is seeded and deterministic.
"""

from __future__ import annotations

import io
import itertools
import json
import math
import time
from contextlib import redirect_stdout
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np

from . import extremal as ex
from . import guarantees as gu
from . import interpret as it
from . import probcore as pc
from . import quantum as qm
from . import stream_cipher as sc


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    time_limit: float | None = None

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        limit = "" if self.time_limit is None else f" (limit {self.time_limit:g} s)"
        return f"[{status}] {self.number:2d} {self.name}: {self.detail} [{self.seconds:.2f} s{limit}]"

    def to_json(self) -> dict:
        return asdict(self)


def _timed(number: int, name: str, limit: float | None, fn: Callable[[], tuple[bool, str]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt >= limit:
        ok, detail = False, f"{detail}; too slow"
    return CheckResult(number, name, bool(ok), detail, dt, limit)


# 1 ---------------------------------------------------------------------------------

def _info_spike() -> tuple[bool, str]:
    bad = []
    for n, l in itertools.product((4, 8, 12), (1, 2, 3)):
        exact = n <= 8
        c = ex.theorem1_check(n, l, exact=exact, tol=0.0 if exact else 1e-12)
        p1_ok = c.p1 == Fraction(1, 1 << l) if exact else abs(c.p1 - 2.0 ** -l) <= 1e-12
        if not (c.ok and p1_ok):
            bad.append((n, l))
    return not bad, f"9 grid points, failures {bad}"


def check_info_spike() -> CheckResult:
    return _timed(1, "whole-key spike attains p1 = 2^-l under I_E/n <= 2^-l", 1.0, _info_spike)


# 2 ---------------------------------------------------------------------------------

def _delta_spike() -> tuple[bool, str]:
    bad = []
    for n, l in itertools.product((4, 8, 12), (1, 2, 3)):
        d = ex.theorem2_dist(n, l).probvec(exact=True)
        delta = pc.stat_distance_to_uniform(d)
        p1 = pc.guess_prob_whole(d)
        if delta != Fraction(1, 1 << l) or p1 != Fraction(1, 1 << l) + Fraction(1, 1 << n):
            bad.append((n, l))
    return not bad, f"9 grid points exact, failures {bad}"


def check_delta_spike() -> CheckResult:
    return _timed(2, "delta spike has delta_E = 2^-l and p1 = 2^-l + 2^-n", 1.0, _delta_spike)


# 3 ---------------------------------------------------------------------------------

def _parity_extension() -> tuple[bool, str]:
    bad = []
    for n in (1, 3, 7):
        d = ex.theorem3_dist(ex.ParityExtension.xor(n), exact=True)
        info = pc.mutual_info_per_bit(d)
        score = pc.bit_prediction_score(d, n)
        if info != Fraction(1, n + 1) or score != 1:
            bad.append(n)
    return not bad, f"n in (1, 3, 7), failures {bad}"


def check_parity_extension() -> CheckResult:
    return _timed(3, "parity bit: I_E/(n+1) = 1/(n+1), extension bit predicted w.p. 1", 1.0, _parity_extension)


# 4 ---------------------------------------------------------------------------------

def _random_batch(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Mixture of Dirichlet draws, spikes, and subcube-concentrated distributions."""
    N = 1 << n
    alpha = rng.choice([0.02, 0.2, 1.0, 5.0], size=(size, 1))
    d = rng.gamma(np.broadcast_to(alpha, (size, N)))
    d /= d.sum(axis=1, keepdims=True)
    kind = rng.integers(0, 3, size)

    spike = kind == 1
    if spike.any():
        k = int(spike.sum())
        mass = rng.random(k)
        rows = np.tile((1 - mass)[:, None] / N, (1, N))
        rows[np.arange(k), rng.integers(0, N, k)] += mass
        d[spike] = rows

    cube = kind == 2
    if cube.any():
        keys = np.arange(N)
        for i in np.flatnonzero(cube):
            fixed = rng.integers(0, N)
            pattern = rng.integers(0, N)
            inside = (keys & fixed) == (pattern & fixed)
            mass = rng.random()
            row = (1 - mass) / N + mass * inside / inside.sum()
            d[i] = row
    return d


def _subset_maxima(d: np.ndarray, n: int, masks: np.ndarray) -> np.ndarray:
    """``max`` of every masked marginal: d is (B, N), masks is (B, M, n) boolean."""
    B, M, _ = masks.shape
    N = 1 << n
    keybits = (np.arange(N)[:, None] >> np.arange(n)) & 1
    rank = np.cumsum(masks, axis=2) - 1
    weight = np.where(masks, 1 << np.clip(rank, 0, None), 0)  # (B, M, n)
    idx = np.einsum("kn,bmn->bmk", keybits, weight)  # (B, M, N)
    flat = idx + (np.arange(B * M) * N).reshape(B, M, 1)
    w = np.broadcast_to(d[:, None, :], (B, M, N))
    marg = np.bincount(flat.ravel(), weights=w.ravel(), minlength=B * M * N)
    return marg.reshape(B, M, N).max(axis=2)


def _subset_bound(total: int = 100_000, masks_each: int = 20, seed: int = 20240) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    per_n = total // 10
    violations = 0
    worst = -math.inf
    count = 0
    for n in range(1, 11):
        chunk = max(1, min(per_n, (1 << 19) // ((1 << n) * masks_each)))
        done = 0
        while done < per_n:
            b = min(chunk, per_n - done)
            d = _random_batch(n, b, rng)
            delta = 0.5 * np.abs(d - 1.0 / (1 << n)).sum(axis=1)
            m = rng.integers(1, n + 1, size=(b, masks_each))
            order = np.argsort(rng.random((b, masks_each, n)), axis=2)
            masks = order < m[:, :, None]
            p1 = _subset_maxima(d, n, masks)
            slack = p1 - (delta[:, None] + 2.0 ** -m)
            violations += int(np.sum(slack > 1e-12))
            worst = max(worst, float(slack.max()))
            done += b
            count += b
    return violations == 0, f"{count} distributions x {masks_each} masks, violations {violations}, max slack {worst:.3g}"


def check_subset_bound() -> CheckResult:
    return _timed(4, "subset guess p1(K~_m) <= delta_E + 2^-m on random instances", 60.0, _subset_bound)


# 5 ---------------------------------------------------------------------------------

def _lfsr_collapse(seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    specs = fails = 0
    worst_gap = 0.0
    for w in range(2, 11):
        for spec in sc.primitive_specs(w):
            specs += 1
            key = int(rng.integers(1, 1 << w))
            stream = sc.generate_keystream(spec, key, 4 * w)
            start = int(rng.integers(0, 3 * w + 1))
            kpa = sc.KpaInstance.consecutive(stream, start, w)
            sol = sc.kpa_recover_seed(spec, kpa)
            oracle = sc.exhaustive_seed_search(spec, kpa)
            lim = sc.shannon_limit_check(spec, 4 * w)
            allowed = math.log2((1 << w) / ((1 << w) - 1))
            gap = lim["ceiling_gap"]
            worst_gap = max(worst_gap, gap - allowed)
            if not (sol.unique and sol.seeds == (key,) == oracle
                    and lim["ceiling_holds"] and gap <= allowed + 1e-12):
                fails += 1
    return fails == 0, f"{specs} primitive specs (width 2-10), failures {fails}, max gap excess {worst_gap:.2g}"


def check_lfsr_collapse() -> CheckResult:
    return _timed(5, "LFSR seed recovered uniquely from width known bits; H(K') <= width", 30.0, _lfsr_collapse)


# 6 ---------------------------------------------------------------------------------

def _raw_runs() -> tuple[bool, str]:
    cases = fails = 0
    for w in range(2, 11):
        for spec in sc.primitive_specs(w):
            for offset in (0, w + 1):
                for include_zero in (False, True):
                    counts = sc.keystream_counts(spec, w, include_zero, start=offset)
                    total = int(counts.sum())
                    for r in range(1, w + 1):
                        for s in range(w - r + 1):
                            mask = pc.SubsetMask.run(w, s, r)
                            marg = np.bincount(mask.index_map(), weights=counts, minlength=1 << r)
                            p1 = Fraction(int(round(marg.max())), total)
                            want = Fraction(1, 1 << r) if include_zero else Fraction(1 << (w - r), (1 << w) - 1)
                            cases += 1
                            fails += p1 != want
    return fails == 0, f"{cases} exact run cases, failures {fails}"


def check_raw_runs() -> CheckResult:
    return _timed(6, "keystream runs: p1 = 2^-r (x 2^w/(2^w-1) without the zero seed)", None, _raw_runs)


# 7 ---------------------------------------------------------------------------------

def _block_identity(seed: int = 7) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 3))
        dim = int(rng.integers(2, 5))
        rank = int(rng.integers(1, dim + 1))
        e = qm.CqEnsemble.random(n, dim, rng, rank=rank)
        r = qm.d_block_identity(e)
        err = abs(r.lhs - r.rhs)
        worst = max(worst, err)
        bad += not err < 1e-9
    return bad == 0, f"100 ensembles, max |lhs - rhs| {worst:.2e}"


def check_block_identity() -> CheckResult:
    return _timed(7, "d equals the averaged per-key trace distance", 10.0, _block_identity)


# 8 ---------------------------------------------------------------------------------

def _witness(seed: int = 8) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    made = fails = 0
    min_dev = math.inf
    while made < 50:
        n = int(rng.integers(1, 3))
        dim = int(rng.integers(2, 5))
        if made % 2:
            e = qm.CqEnsemble.near_uniform(n, dim, float(10 ** rng.uniform(-2.9, -1)), rng)
        else:
            e = qm.CqEnsemble.random(n, dim, rng)
        if qm.d_criterion(e) <= 1e-3:
            continue
        made += 1
        w = qm.statement_A_witness(e, rng=rng, trials=8)
        min_dev = min(min_dev, w.max_deviation)
        fails += not w.max_deviation > 1e-6

    worst = 0.0
    for _ in range(50):
        b0, b1 = rng.normal(size=(2, 3))
        b0 *= rng.random() ** (1 / 3) / np.linalg.norm(b0)
        b1 *= rng.random() ** (1 / 3) / np.linalg.norm(b1)
        r0, r1 = qm.DensityMatrix.qubit(b0), qm.DensityMatrix.qubit(b1)
        e = qm.CqEnsemble(1, (r0, r1))
        got = pc.guess_prob_whole(qm.measurement_cpd(e, qm.Povm.helstrom(r0, r1)))
        worst = max(worst, abs(got - (0.5 + 0.25 * qm.trace_norm(r0.entries - r1.entries))))
    ok = fails == 0 and worst <= 1e-9
    return ok, (f"50 ensembles with d > 1e-3, min deviation {min_dev:.3g}; "
                f"50 qubit pairs, Helstrom error {worst:.2e}")


def check_witness() -> CheckResult:
    return _timed(8, "positive d leaves a non-uniform posterior; Helstrom success formula", None, _witness)


# 9 ---------------------------------------------------------------------------------

def _mixture_infeasible() -> tuple[bool, str]:
    e = qm.CqEnsemble(1, (qm.DensityMatrix.pure([1, 0]), qm.DensityMatrix.pure([0, 1])))
    r = qm.eq18_feasibility(e)
    return r.min_eigenvalue < -1e-3, f"eps = d = {r.eps:g}, residual min eigenvalue {r.min_eigenvalue:.6g}"


def check_mixture_infeasible() -> CheckResult:
    return _timed(9, "orthogonal pure pair admits no (1-eps) ideal + eps sigma split", None, _mixture_infeasible)


# 10 --------------------------------------------------------------------------------

def _couplings(seed: int = 10) -> tuple[bool, str]:
    bad = []
    for n in (1, 2, 4):
        u = pc.ProbVec.uniform(n)
        N = 1 << n
        mx = it.maximal_coupling(u, u).pr_neq()
        ind = it.independent_coupling(u, u).pr_neq()
        if not (mx == 0.0 == float(pc.stat_distance(u, u)) and ind == 1 - 1 / N):
            bad.append(f"N={N}")
        if N <= 4 and abs(it.min_disagreement_lp(u, u) - mx) > 1e-9:
            bad.append(f"LP N={N}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(1, 3))
        p = pc.ProbVec(n, rng.dirichlet(np.ones(1 << n)))
        q = pc.ProbVec(n, rng.dirichlet(np.ones(1 << n)))
        worst = max(worst, abs(it.min_disagreement_lp(p, q) - it.maximal_coupling(p, q).pr_neq()))
    ok = not bad and worst <= 1e-9
    return ok, f"uniform N in (2, 4, 16) failures {bad}; LP vs maximal on 30 random pairs, max gap {worst:.1e}"


def check_couplings() -> CheckResult:
    return _timed(10, "same marginals, Pr[X != X'] = 0 (maximal) vs 1 - 1/N (independent)", 5.0, _couplings)


# 11 --------------------------------------------------------------------------------

def _decomposition(seed: int = 11) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    done = fails = 0
    worst = 0.0
    while done < 1000:
        n = int(rng.integers(1, 5))
        alpha = float(rng.choice([0.3, 1.0, 10.0]))
        p = rng.dirichlet(np.full(1 << n, alpha))
        q = rng.dirichlet(np.full(1 << n, alpha))
        # entries near 1e-20 are zero in double precision; keep the support genuinely full
        if min(p.min(), q.min()) < 1e-6:
            continue
        P, Q = pc.ProbVec(n, p), pc.ProbVec(n, q)
        delta = float(pc.stat_distance(P, Q))
        if not 0 < delta < 1:
            continue
        r = it.eq12_decomposition_test(P, Q)
        done += 1
        worst = max(worst, r.delta_pprime_q)
        fails += not (r.delta_pprime_q < 1 and not r.iff_condition and not r.valid_pprime)
    return fails == 0, f"1000 full-support pairs, max delta(P', Q) {worst:.6f}, failures {fails}"


def check_decomposition() -> CheckResult:
    return _timed(11, "full-support pairs never split as (1-delta) Q + delta P' with delta(P',Q) = 1",
                  None, _decomposition)


# 12 --------------------------------------------------------------------------------

def _markov() -> tuple[bool, str]:
    from .cli import main

    buf = io.StringIO()
    with redirect_stdout(buf):
        status = main(["guarantee", "markov", "--eps", "2^-20"])
    text = buf.getvalue()
    res = json.loads(text)["result"]
    ok = (status == 0 and '"bound": 0.0009765625' in text and '"confidence": 0.9990234375' in text
          and res["bound"] == 2.0 ** -10 and res["confidence"] == 1 - 2.0 ** -10)
    return ok, f"bound {res['bound']!r}, confidence {res['confidence']!r}"


def check_markov() -> CheckResult:
    return _timed(12, "average 2^-20 gives 2^-10 per instance at confidence 1 - 2^-10", None, _markov)


# 13 --------------------------------------------------------------------------------

TABLE1_EXPECTED = {
    ("p1", False): [("leak of K with probability eps", gu.COMPUTED), ("f ~ 1 - eps", gu.PAPER)],
    ("p1", True): [("leak of K with probability eps", gu.COMPUTED), ("f >= 1 - eps", gu.PAPER)],
    ("I_E", False): [("p1(K) ~ eps", gu.COMPUTED), ("p1(K~) ~ (|K|/|K~|) eps", gu.PAPER),
                     ("f ~ eps", gu.COMPUTED)],
    ("I_E", True): [("p1(K) ~ eps", gu.COMPUTED), ("p1(K~) ~ (|K|/|K~|) eps", gu.PAPER),
                    ("f >= log(1/eps)", gu.PAPER)],
    ("delta_E", False): [("p1(K) = eps + 1/N", gu.COMPUTED), ("p1(K~) = eps + 1/2^|K~|", gu.COMPUTED),
                         ("f ~ 0", gu.COMPUTED)],
    ("delta_E", True): [("p1(K) = eps + 1/N", gu.COMPUTED), ("p1(K~) = eps + 1/2^|K~|", gu.COMPUTED),
                        ("f ~ ?", gu.PAPER)],
}


def _table1() -> tuple[bool, str]:
    bad = []
    for (kind, memory), want in TABLE1_EXPECTED.items():
        rep = gu.table1_report(gu.CriterionSpec(kind, 2.0 ** -10, 16, memory, 4))
        got = [(r.formula, r.provenance) for r in rep.rows]
        if got != want:
            bad.append((kind, memory))
        if (kind, memory) == ("delta_E", True) and rep.rows[-1].value is not None:
            bad.append("unknown cell filled")
    return not bad, f"6 cells, mismatches {bad}"


def check_table1() -> CheckResult:
    return _timed(13, "guarantee table formulas and provenance, unknown cell kept open", None, _table1)


# 14 --------------------------------------------------------------------------------

def surjective_linear_maps(in_bits: int, out_bits: int) -> list[pc.PaMap]:
    """Every full-rank GF(2) matrix with ``out_bits`` rows as a PaMap."""
    maps = []
    for rows in itertools.product(range(1, 1 << in_bits), repeat=out_bits):
        span = {0}
        for r in rows:
            span |= {s ^ r for s in span}
        if len(span) == 1 << out_bits:
            maps.append(pc.PaMap.linear([[(r >> j) & 1 for j in range(in_bits)] for r in rows]))
    return maps


def _pa_monotone(seed: int = 14) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    maps = surjective_linear_maps(3, 2)
    dists = _random_batch(3, 1000, rng)
    drops = 0
    for f in maps:
        out = np.zeros((1000, 4))
        for k in range(8):
            out[:, f.table[k]] += dists[:, k]
        drops += int(np.sum(out.max(axis=1) < dists.max(axis=1)))
    # spot-check the vectorized pushforward against apply_pa
    spot = all(pc.guess_prob_whole(pc.apply_pa(pc.ProbVec(3, dists[i]), f)) >= dists[i].max()
               for f in maps for i in range(0, 1000, 97))
    return drops == 0 and spot, f"{len(maps)} maps x 1000 distributions, decreases {drops}"


def check_pa_monotone() -> CheckResult:
    return _timed(14, "linear compression never lowers the whole-key guess", None, _pa_monotone)


CHECKS = (check_info_spike, check_delta_spike, check_parity_extension, check_subset_bound, check_lfsr_collapse, check_raw_runs,
          check_block_identity, check_witness, check_mixture_infeasible, check_couplings,
          check_decomposition, check_markov, check_table1, check_pa_monotone)


def run_all() -> list[CheckResult]:
    with mpmath.workdps(pc.MP_DPS):
        return [c() for c in CHECKS]
