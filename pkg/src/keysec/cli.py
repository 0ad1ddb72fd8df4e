"""Command-line entry point: one subcommand per module, JSON/CSV/table output.

Every report is wrapped in an envelope carrying the tool version, the command,
its configuration, and a provenance tag.  Output is deterministic: keys are
sorted, nothing time-dependent is written, and randomized operations require
``--seed``.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import SizeGuardError, __version__
from . import extremal as ex
from . import guarantees as gu
from . import interpret as it
from . import probcore as pc
from . import quantum as qm
from . import stream_cipher as sc

TOOL = "keysec"
CSV_COLUMNS = ["criterion", "epsilon", "n", "metric", "value", "provenance"]


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit through our JSON error path instead of argparse's exit 2
        raise UsageError(message)


# -- parsing helpers ---------------------------------------------------------------

_POW = re.compile(r"^\s*2\s*(?:\^|\*\*)\s*\(?\s*(-?\d+)\s*\)?\s*$")


def parse_eps(text: str) -> float:
    """A float, or a power of two written ``2^-20`` / ``2**-20``."""
    m = _POW.match(text)
    if m:
        return 2.0 ** int(m.group(1))
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number or power of two: {text!r}") from None


def parse_int(text: str) -> int:
    """Decimal, or hex with a ``0x`` prefix."""
    return int(text, 0)


def _list(text: str | None, conv) -> list | None:
    if text is None:
        return None
    return [conv(t) for t in text.split(",") if t.strip()]


def _need(args, *names: str) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} {args.action or ''}".strip() + f" requires {', '.join(missing)}")


def _rng(args) -> np.random.Generator:
    if args.seed is None:
        raise UsageError(f"{args.command} {args.action or ''}".strip() + " is randomized and requires --seed")
    return np.random.default_rng(args.seed)


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _mask(args, n: int) -> pc.SubsetMask | None:
    if args.mask is not None:
        return pc.SubsetMask(n, tuple(_list(args.mask, int)))
    if args.m is not None:
        return pc.SubsetMask.run(n, 0, args.m)
    return None


# -- JSON normalisation -------------------------------------------------------------

def plain(obj):
    """Convert results to JSON-safe builtins; non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if obj is None or isinstance(obj, str):
        return obj
    v = float(obj)  # Fraction, mpf, numpy floats
    return v if math.isfinite(v) else None


def _exact(v) -> dict:
    """Float value plus, for rationals, the exact fraction as text."""
    out = {"value": plain(v)}
    if isinstance(v, Fraction):
        out["exact"] = str(v)
    return out


# -- subcommands ---------------------------------------------------------------------

def cmd_metrics(args) -> dict:
    _need(args, "input")
    dist = pc.load_distribution(_read_json(args.input))
    cpd = dist if isinstance(dist, pc.Cpd) else pc.Cpd.single(dist)
    n = cpd.n
    recs = [pc.metric_record("I_E_per_bit", pc.mutual_info_per_bit(dist), {"n": n}),
            pc.metric_record("delta_E", sum(float(w) * float(pc.stat_distance_to_uniform(d))
                                            for w, d in cpd.outcomes), {"n": n}),
            pc.metric_record("p1", pc.guess_prob_whole(dist), {"n": n})]
    if isinstance(dist, pc.ProbVec):
        recs.insert(0, pc.metric_record("entropy", pc.shannon_entropy(dist), {"n": n}))
    mask = _mask(args, n)
    if mask is not None:
        recs.append(pc.metric_record("p1_subset", pc.guess_prob_subset(dist, mask),
                                     {"n": n, "mask": list(mask.positions)}))
    if isinstance(dist, pc.ProbVec) and n >= 2:
        pos, prob = pc.bit_prediction_advantage(dist)
        recs.append(pc.metric_record("bit_prediction", prob, {"n": n, "position": pos}))
    return {"provenance": gu.COMPUTED, "metrics": recs}


def _spike_summary(s: ex.SpikeDist) -> dict:
    return {"n": s.n, "position": s.position, "p1": _exact(s.p1), "tail": _exact(s.tail),
            "delta_E": _exact(s.delta()), "I_E_per_bit": s.info_per_bit(), "entropy": s.entropy()}


def cmd_construct(args) -> dict:
    act = args.action
    if act == "theorem1":
        _need(args, "n", "l")
        s = ex.theorem1_dist(args.n, args.l)
        out = _spike_summary(s)
        out["p1_lower_bound"] = _exact(Fraction(1, 1 << args.l) - Fraction(1, args.n * (1 << args.n)))
        out["info_budget"] = 2.0 ** -args.l
        if args.n <= ex.MAX_SEARCH_BITS:
            exact = args.n <= 8
            c = ex.theorem1_check(args.n, args.l, exact=exact, tol=0.0 if exact else 1e-12)
            out["check"] = {"mode": "exact" if exact else "float", "info_ok": c.info_ok, "p1_ok": c.p1_ok}
        return {"provenance": gu.COMPUTED, "construction": out}
    if act == "theorem2":
        _need(args, "n", "l")
        return {"provenance": gu.COMPUTED, "construction": _spike_summary(ex.theorem2_dist(args.n, args.l))}
    if act == "theorem3":
        _need(args, "n")
        if args.n > 16:
            raise SizeGuardError("parity extension enumeration limited to n <= 16")
        fn = args.function or "xor"
        ext = {"xor": ex.ParityExtension.xor, "copy": ex.ParityExtension.copy_bit,
               "constant": ex.ParityExtension.constant}[fn](args.n)
        d = ex.theorem3_dist(ext, exact=args.n <= 10)
        return {"provenance": gu.COMPUTED, "construction": {
            "base_n": args.n, "key_bits": args.n + 1, "function": fn,
            "I_E_per_bit": _exact(pc.mutual_info_per_bit(d)),
            "extension_bit_prediction": _exact(pc.bit_prediction_score(d, args.n)),
            "p1": _exact(pc.guess_prob_whole(d))}}
    # search
    _need(args, "n", "eps")
    rng_seed = args.seed
    if rng_seed is None:
        raise UsageError("construct search is randomized and requires --seed")
    mask = _mask(args, args.n)
    cfg = ex.SearchConfig(args.n, args.constraint or "delta_E", args.eps, "subset" if mask is not None else "whole",
                          mask, seed=rng_seed, restarts=args.restarts or 4)
    res = ex.subset_leak_search(cfg)
    out = {"config": cfg.params(), "found": res.found, "reason": res.reason, "seed": res.seed,
           "family_params": list(res.params), "objective_value": res.objective_value,
           "constraint_value": res.constraint_value}
    if res.found:
        out["certificate"] = res.certificate()
        out["verified"] = ex.verify_certificate(res.certificate(), cfg)
        if cfg.constraint == "delta_E" and mask is not None:
            out["delta_subset_bound"] = gu.delta_subset_bound(cfg.eps, mask.m).value
    return {"provenance": gu.COMPUTED, "search": out}


def _lfsr_spec(args) -> sc.LfsrSpec:
    _need(args, "width")
    if args.taps is None:
        return sc.primitive_specs(args.width, args.form or "fibonacci")[0]
    return sc.LfsrSpec(args.width, args.taps, args.form or "fibonacci")


def _lfsr_state(args, spec: sc.LfsrSpec) -> int:
    if args.state is not None:
        return args.state
    return int(_rng(args).integers(1, 1 << spec.width))


def cmd_lfsr(args) -> dict:
    spec = _lfsr_spec(args)
    info = {"spec": spec.to_json(), "form": spec.form, "primitive": sc.is_primitive(spec)
            if spec.width <= sc.MAX_ENUM_WIDTH else None}
    if args.action == "generate":
        length = args.length or 4 * spec.width
        ks = sc.generate_keystream(spec, _lfsr_state(args, spec), length, allow_zero=args.include_zero)
        return {"provenance": gu.COMPUTED, **info, "keystream": ks.to_json(),
                "bits": "".join(str(int(b)) for b in ks.bits)}
    if args.action == "entropy":
        length = args.length or 4 * spec.width
        return {"provenance": gu.COMPUTED, **info,
                "entropy": sc.shannon_limit_check(spec, length, args.include_zero)}
    # kpa
    if args.input is not None:
        kpa = sc.KpaInstance.from_json(_read_json(args.input))
        truth = None
    else:
        truth = _lfsr_state(args, spec)
        m = args.m or spec.width
        start = args.start or 0
        ks = sc.generate_keystream(spec, truth, start + m)
        kpa = sc.KpaInstance.consecutive(ks, start, m)
    sol = sc.kpa_recover_seed(spec, kpa, args.include_zero)
    out = {"provenance": gu.COMPUTED, **info, "known": kpa.to_json(), "solution": sol.to_json(),
           "unique": sol.unique}
    if spec.width <= sc.MAX_ENUM_WIDTH:
        oracle = sc.exhaustive_seed_search(spec, kpa, args.include_zero)
        out["exhaustive_agrees"] = oracle == sol.seeds
    if truth is not None:
        out["true_seed"] = f"0x{truth:x}"
        out["recovered"] = sol.unique and sol.seeds[0] == truth
    return out


def _ensemble(args) -> qm.CqEnsemble:
    if args.input is not None:
        return qm.CqEnsemble.from_json(_read_json(args.input))
    _need(args, "n", "dim")
    rng = _rng(args)
    if args.target_d is not None:
        return qm.CqEnsemble.near_uniform(args.n, args.dim, args.target_d, rng)
    return qm.CqEnsemble.random(args.n, args.dim, rng)


def _povm(args, e: qm.CqEnsemble) -> qm.Povm:
    if args.povm == "computational":
        return qm.Povm.computational(e.dim)
    if args.povm == "helstrom":
        if e.N != 2:
            raise UsageError("helstrom measurement needs a one-bit key (n = 1)")
        return qm.Povm.helstrom(*e.states)
    _rng(args)  # seed check
    return qm.Povm.random(e.dim, args.outcomes or 4, np.random.default_rng([args.seed, 1]))


def cmd_quantum(args) -> dict:
    e = _ensemble(args)
    head = {"provenance": gu.COMPUTED, "n": e.n, "dim": e.dim}
    act = args.action
    if act == "d":
        return {**head, "d": qm.d_criterion(e)}
    if act == "identity":
        r = qm.d_block_identity(e)
        return {**head, "identity": vars(r)}
    if act == "helstrom":
        if e.N != 2:
            raise UsageError("helstrom needs a one-bit key (n = 1)")
        r0, r1 = e.states
        cpd = qm.measurement_cpd(e, qm.Povm.helstrom(r0, r1))
        return {**head, "formula": qm.helstrom_guess_prob(r0, r1), "measured": pc.guess_prob_whole(cpd),
                "trace_distance": qm.trace_distance(r0, r1)}
    if act == "eq22":
        rep = qm.eq22_bound(e, _povm(args, e))
        return {**head, "bound": rep.to_json(), "any_vacuous": rep.any_vacuous}
    if act == "eq18":
        r = qm.eq18_feasibility(e, args.eps)
        return {**head, "mixture": vars(r)}
    trials = args.trials or 0
    if trials and args.seed is None:
        raise UsageError("quantum witness with --trials requires --seed")
    rng = np.random.default_rng([args.seed, 2]) if trials else None
    return {**head, "witness": qm.statement_A_witness(e, rng=rng, trials=trials).to_json()}


def _pair(args) -> tuple[pc.ProbVec, pc.ProbVec]:
    if args.input is not None:
        obj = _read_json(args.input)
        return pc.ProbVec.from_json(obj["p"]), pc.ProbVec.from_json(obj["q"])
    _need(args, "n")
    rng = _rng(args)
    N = 1 << args.n
    return pc.ProbVec(args.n, rng.dirichlet(np.ones(N))), pc.ProbVec(args.n, rng.dirichlet(np.ones(N)))


def cmd_couplings(args) -> dict:
    p, q = _pair(args)
    out = {"provenance": gu.COMPUTED, "n": p.n, "delta": pc.stat_distance(p, q)}
    if args.action in ("maximal", "independent"):
        c = (it.maximal_coupling if args.action == "maximal" else it.independent_coupling)(p, q)
        out["pr_neq"] = c.pr_neq()
        if p.N <= 16:
            out["joint"] = c.joint.tolist()
        if p.N <= 8:
            out["lp_min_pr_neq"] = it.min_disagreement_lp(p, q)
        return out
    r = it.eq12_decomposition_test(p, q)
    out.update({"summary": r.row(p, q), "solved_pprime": r.solved_pprime, "delta_signed": r.delta_signed,
                "eps_min": r.eps_min, "pprime_min": r.pprime_min, "iff_condition": r.iff_condition,
                "supports_overlap": r.supports_overlap})
    return out


def _criterion(args) -> gu.CriterionSpec:
    _need(args, "eps", "n")
    return gu.CriterionSpec(args.criterion or "delta_E", args.eps, args.n, args.quantum_memory, args.m)


def cmd_guarantee(args) -> dict | gu.GuaranteeReport | gu.BenchmarkReport:
    act = args.action
    if act == "markov":
        _need(args, "eps")
        return {"provenance": gu.COMPUTED, **gu.markov_individualize(args.eps).to_json()}
    if act == "subset":
        _need(args, "eps", "m")
        b = gu.delta_subset_bound(args.eps, args.m)
        return {"provenance": gu.COMPUTED, "eps": b.eps, "m": b.m, "raw": b.raw, "bound": b.value,
                "vacuous": b.vacuous}
    if act == "table1":
        return gu.table1_report(_criterion(args))
    _need(args, "width")
    return gu.benchmark_vs_conventional(_criterion(args), args.width, args.m, args.rate, args.l)


def sweep_cell(cell: tuple) -> list[dict]:
    """Table rows of one (criterion, eps, n, quantum_memory, m) grid cell."""
    kind, eps, n, qmem, m = cell
    rows = gu.table1_report(gu.CriterionSpec(kind, eps, n, qmem, m)).csv_rows()
    if kind != "p1" and eps > 0:
        spike = ex.SpikeDist(n, max(Fraction(eps) + (Fraction(1, 1 << n) if kind == "delta_E" else 0),
                                    Fraction(1, 1 << n)))
        rows.append({"criterion": kind, "epsilon": eps, "n": n, "metric": "construction:I_E_per_bit",
                     "value": spike.info_per_bit(), "provenance": gu.COMPUTED})
        rows.append({"criterion": kind, "epsilon": eps, "n": n, "metric": "construction:delta_E",
                     "value": float(spike.delta()), "provenance": gu.COMPUTED})
    return rows


def cmd_sweep(args) -> dict:
    kinds = _list(args.criteria, str) or list(gu.KINDS)
    eps_list = _list(args.eps_list, parse_eps)
    if eps_list is None:
        ls = _list(args.l_list, int) or ([args.l] if args.l is not None else None)
        if ls is None:
            eps_list = [args.eps] if args.eps is not None else None
        else:
            eps_list = [2.0 ** -l for l in ls]
    n_list = _list(args.n_list, int) or ([args.n] if args.n is not None else None)
    if not eps_list or not n_list:
        raise UsageError("sweep needs an epsilon grid (--eps-list, --l-list, --eps or --l) and --n-list/--n")
    cells = [(k, e, n, args.quantum_memory, None if args.m is None else min(args.m, n))
             for k in kinds for e in eps_list for n in n_list]
    if (args.jobs or 1) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(sweep_cell, cells))  # map keeps grid order
    else:
        results = [sweep_cell(c) for c in cells]
    rows = [r for block in results for r in block]
    return {"provenance": "mixed", "cells": len(cells), "rows": rows}


def cmd_repro(args) -> dict:
    from .acceptance import run_all

    results = run_all()
    return {"provenance": gu.COMPUTED, "passed": sum(r.passed for r in results), "total": len(results),
            "all_passed": all(r.passed for r in results),
            "criteria": [{k: v for k, v in r.to_json().items() if k != "seconds"} for r in results],
            "_lines": [r.line for r in results]}


COMMANDS = {
    "metrics": (cmd_metrics, None),
    "construct": (cmd_construct, ("theorem1", "theorem2", "theorem3", "search")),
    "lfsr": (cmd_lfsr, ("generate", "entropy", "kpa")),
    "quantum": (cmd_quantum, ("d", "identity", "helstrom", "eq22", "eq18", "witness")),
    "couplings": (cmd_couplings, ("maximal", "independent", "eq12")),
    "guarantee": (cmd_guarantee, ("markov", "subset", "table1", "benchmark")),
    "sweep": (cmd_sweep, None),
    "repro": (cmd_repro, None),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", help="input JSON file")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv", "table"), default=None)
    common.add_argument("--seed", type=int, help="RNG seed; required by randomized operations")
    common.add_argument("--n", type=int, help="key length in bits")
    common.add_argument("--l", type=int, help="exponent: budget 2^-l")
    common.add_argument("--m", type=int, help="subset size / known bits")
    common.add_argument("--eps", type=parse_eps, help="criterion budget, e.g. 0.01 or 2^-20")
    common.add_argument("--width", type=int, help="LFSR width")
    common.add_argument("--taps", type=parse_int, help="feedback polynomial incl. x^width, e.g. 0x19")
    common.add_argument("--dim", type=int, help="probe dimension")

    p = _Parser(prog=TOOL, description="Key-security criteria toolkit.")
    p.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, actions) in COMMANDS.items():
        sp = sub.add_parser(name, parents=[common])
        if actions:
            sp.add_argument("action", choices=actions)
        else:
            sp.set_defaults(action=None)
        if name == "metrics":
            sp.add_argument("--mask", help="comma-separated bit positions for the subset guess")
        if name == "construct":
            sp.add_argument("--constraint", choices=("I_E", "delta_E"), help="default delta_E")
            sp.add_argument("--mask", help="comma-separated bit positions (subset objective)")
            sp.add_argument("--restarts", type=int, help="default 4")
            sp.add_argument("--function", choices=("xor", "copy", "constant"), help="default xor")
        if name == "lfsr":
            sp.add_argument("--form", choices=("fibonacci", "galois"), help="default fibonacci")
            sp.add_argument("--state", type=parse_int, help="register seed (hex with 0x)")
            sp.add_argument("--length", type=int)
            sp.add_argument("--start", type=int, help="offset of the known run (kpa)")
            sp.add_argument("--include-zero", action="store_true")
        if name == "quantum":
            sp.add_argument("--target-d", type=float, help="build a random ensemble with this d")
            sp.add_argument("--povm", choices=("random", "computational", "helstrom"), help="default random")
            sp.add_argument("--outcomes", type=int, help="random POVM size, default 4")
            sp.add_argument("--trials", type=int, help="extra random measurements for witness")
        if name in ("guarantee", "sweep"):
            sp.add_argument("--criterion", "--criteria", dest="criteria" if name == "sweep" else "criterion",
                            help="p1, I_E or delta_E (comma list for sweep)")
            sp.add_argument("--quantum-memory", action="store_true")
        if name == "guarantee":
            sp.add_argument("--rate", type=float)
        if name == "sweep":
            sp.add_argument("--eps-list")
            sp.add_argument("--l-list")
            sp.add_argument("--n-list")
            sp.add_argument("--jobs", type=int, help="worker processes, default 1")
    return p


# -- rendering -----------------------------------------------------------------------

def _envelope(args, result) -> dict:
    config = {k: v for k, v in sorted(vars(args).items())
              if v is not None and v is not False and k not in ("command", "action", "output", "format")}
    return {"tool": TOOL, "version": __version__,
            "command": " ".join(x for x in (args.command, args.action) if x),
            "config": config, "result": result}


def _flatten(prefix: str, obj, out: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else k, obj[k], out)
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def render(args, result) -> str:
    fmt = args.format or ("csv" if args.command == "sweep" else "json")
    lines = None
    if isinstance(result, dict):
        lines = result.pop("_lines", None)
    if fmt == "table":
        if lines is not None:
            return "\n".join(lines) + "\n"
        if hasattr(result, "to_table"):
            return result.to_table() + "\n"
        if args.command == "sweep":
            body = [[gu.fmt17(r[c]) for c in CSV_COLUMNS] for r in result["rows"]]
            return gu.format_table(CSV_COLUMNS, body) + "\n"
        pairs = []
        _flatten("", plain(result), pairs)
        return gu.format_table(("field", "value"), [(k, "-" if v is None else v) for k, v in pairs]) + "\n"
    if fmt == "csv":
        if hasattr(result, "csv_rows"):
            rows = result.csv_rows()
        elif args.command == "sweep":
            rows = result["rows"]
        else:
            pairs = []
            _flatten("", plain(result.to_json() if hasattr(result, "to_json") else result), pairs)
            prov = result.get("provenance", gu.COMPUTED) if isinstance(result, dict) else gu.COMPUTED
            rows = [{"criterion": getattr(args, "criterion", "") or "", "epsilon": args.eps, "n": args.n,
                     "metric": k, "value": v, "provenance": prov}
                    for k, v in pairs if k != "provenance"]
        buf = io.StringIO()
        gu.write_csv(rows, buf)
        return buf.getvalue()
    body = result.to_json() if hasattr(result, "to_json") else result
    if not isinstance(result, dict):
        body = {"provenance": "per-row", **body}
    return json.dumps(plain(_envelope(args, body)), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _error(kind: str, message: str, argv) -> str:
    return json.dumps({"tool": TOOL, "version": __version__, "argv": list(argv),
                       "error": {"type": kind, "message": message}}, indent=2, sort_keys=True) + "\n"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        handler, _ = COMMANDS[args.command]
        result = handler(args)
        _emit(render(args, result), args.output)
        if args.command == "repro" and not result["all_passed"]:
            return 1
        return 0
    except SizeGuardError as exc:
        sys.stdout.write(_error("SizeGuardError", str(exc), argv))
        return 2
    except (ValueError, KeyError, TypeError, OSError, argparse.ArgumentTypeError) as exc:
        kind = "UsageError" if isinstance(exc, UsageError) else "ValidationError"
        sys.stdout.write(_error(kind, str(exc), argv))
        return 1


if __name__ == "__main__":
    sys.exit(main())
