"""Command-line interface.

Exit codes: 0 success, 1 invalid input, 2 computation error, 3 a verify
comparison failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import bounds, families, montecarlo
from .config import RunConfig, load_config
from .errors import ConfigError, UStatError
from .gls import gls_norm, tail_envelope, uniform_bound, young_orlicz
from .hoeffding import decompose, variance_asymptotic, variance_exact
from .model import LpMoments, center, kernel_tail

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_FAIL = 0, 1, 2, 3
NEGATIVE_CONTROL_SCALE = 0.5

EXAMPLES = {
    "constants": "ustatbounds constants",
    "decompose": "ustatbounds decompose --config cfg.json   # cfg: {\"kernel\": {\"name\": \"sample_variance\"}}",
    "variance": "ustatbounds variance --config cfg.json    # cfg: {\"kernel\": {\"name\": \"sum\"}, \"ns\": [5, 200]}",
    "bound": "ustatbounds bound --config cfg.json       # cfg: {\"bound\": {\"d\": 2, \"r\": 1, \"n\": 10, \"p\": 4, \"phi_p\": 1}}",
    "norm": "ustatbounds norm --config cfg.json --out runs/   # cfg: {\"kernel\": {\"name\": \"product\"}}",
    "tail": "ustatbounds tail --config cfg.json --out runs/   # cfg: {\"kernel\": {\"name\": \"identity\"}, "
            "\"dist\": {\"poisson_centered\": {\"p_max\": 20}}}",
    "simulate": "ustatbounds simulate --config cfg.json --seed 7 --workers 4 --out runs/   "
                "# cfg: {\"kernel\": {\"name\": \"product\"}, \"ns\": [3, 10, 50], \"replications\": 10000}",
    "verify": "ustatbounds verify --config cfg.json --seed 7 --out runs/ --negative-control",
}

HELP = {
    "constants": "print K_Os and gamma(1..6)",
    "decompose": "Hoeffding projection tables and variances",
    "variance": "exact and leading-order variance of U(n)",
    "bound": "moment bounds for |U(n)|_p",
    "norm": "Grand Lebesgue norm of the kernel and the uniform U-statistic bound",
    "tail": "exponential tail envelope against the kernel's exact tail",
    "simulate": "seeded Monte Carlo report of U(n)/sigma(n)",
    "verify": "simulate (or load a report) and check every bound",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise ConfigError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (families.PowerLogFamily, families.ExpBetaFamily)):
        return {k: str(v) for k, v in vars(obj).items()}
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


class Output:
    """Collects result files; writes them under ``--out`` or prints the main JSON."""

    def __init__(self, out: Path | None):
        self.out = out
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def flush(self, main: str) -> list[str]:
        if self.out is None:
            sys.stdout.write(self.files[main])
            return []
        self.out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.files.items():
            path = self.out / name
            path.write_text(text)
            written.append(str(path))
        return written


def cmd_constants(cfg: RunConfig, out: Output) -> tuple[str, int]:
    k = bounds.osekowski_constant()
    out.add("constants.json", dumps({
        "K_Os": k,
        "maximizer": bounds.osekowski_maximizer(),
        "gamma": {str(d): g for d, g in enumerate(bounds.gamma_table(6), start=1)},
        "gamma_envelope": {str(d): bounds.gamma_envelope(d) for d in range(1, 7)},
    }))
    return f"K_Os = {k:.7f}", EXIT_OK


def cmd_decompose(cfg: RunConfig, out: Output) -> tuple[str, int]:
    pset = decompose(center(cfg.kernel(), cfg.dist()), cap=cfg.cap)
    payload = pset.to_dict()
    payload["max_degeneracy_error"] = pset.max_degeneracy_error()
    out.add("decompose.json", dumps(payload))
    return f"degree {pset.degree}, rank {pset.rank}", EXIT_OK


def cmd_variance(cfg: RunConfig, out: Output) -> tuple[str, int]:
    cfg.require("kernel", "ns")
    pset = decompose(center(cfg.kernel(), cfg.dist()), cap=cfg.cap)
    rows = []
    for n in cfg.data["ns"]:
        exact = variance_exact(pset, n)
        asym = variance_asymptotic(pset, n)
        rows.append({"n": n, "exact": exact, "asymptotic": asym, "ratio": asym / exact})
    out.add("variance.json", dumps({"rank": pset.rank, "degree": pset.degree,
                                    "projection_variances": pset.variances, "by_n": rows}))
    return f"rank {pset.rank}; {len(rows)} sample sizes", EXIT_OK


def _bound_entry(b: bounds.BoundInput, sigma: float | None) -> dict:
    detailed = bounds.moment_bound_detailed(b)
    entry = {"d": b.d, "r": b.r, "n": b.n, "p": b.p, "phi_p": b.phi_p, "detailed": detailed,
             "c_eff": detailed / (b.n ** (-b.r / 2.0) * (b.p / math.log(b.p)) ** b.d * b.phi_p),
             "normalized": None, "sigma_n": sigma}
    if sigma is not None:
        entry["normalized"] = bounds.moment_bound_normalized(b, sigma).value
    return entry


def cmd_bound(cfg: RunConfig, out: Output) -> tuple[str, int]:
    if "bound" in cfg.data:
        spec = cfg.data["bound"]
        entries = [_bound_entry(bounds.BoundInput(spec["d"], spec["r"], spec["n"], spec["p"], spec["phi_p"]),
                                spec.get("sigma_n"))]
        d = spec["d"]
    else:
        cfg.require("kernel", "ns", "ps")
        pset = decompose(center(cfg.kernel(), cfg.dist()), cap=cfg.cap)
        lp = LpMoments(pset.kernel, pset.kernel.dist, cfg.cap)
        d = pset.degree
        entries = [
            _bound_entry(bounds.BoundInput(d, pset.rank, n, p, lp(p)), math.sqrt(variance_exact(pset, n)))
            for n in cfg.data["ns"] for p in cfg.data["ps"]
        ]
    out.add("bound.json", dumps({"bounds": entries, "gamma_table": bounds.gamma_table(d)}))
    return f"{len(entries)} bound(s); max detailed {max(e['detailed'] for e in entries):.6g}", EXIT_OK


def _norm_payload(cfg: RunConfig):
    pset = decompose(center(cfg.kernel(), cfg.dist()), cap=cfg.cap)
    kern = pset.kernel
    psi = cfg.psi(kern)
    norm = gls_norm(LpMoments(kern, kern.dist, cfg.cap), psi)
    ub, psi_d = uniform_bound(pset, psi)
    return pset, psi, norm, ub, psi_d


def cmd_norm(cfg: RunConfig, out: Output) -> tuple[str, int]:
    pset, psi, norm, ub, psi_d = _norm_payload(cfg)
    ps = np.geomspace(2.0, min(psi.p_hi, 1e3), 25)
    out.add("norm.json", dumps({
        "gls_norm": norm,
        "psi": {"family": psi.family, "p": ps, "value": psi(ps)},
        "uniform_bound": {"constant": ub.constant, "phi_norm": ub.phi_norm, "bound": ub.bound,
                      "d": ub.d, "r": ub.r, "n_max": ub.n_max},
    }))
    orlicz = young_orlicz(psi)
    us = np.round(np.linspace(0.0, 8.0, 81), 6)
    out.add("orlicz.csv", _csv_text(["u", "M"], zip(us, orlicz(us))))
    return f"||Phi|| = {norm:.6g}; uniform bound {ub.bound:.6g}", EXIT_OK


def cmd_tail(cfg: RunConfig, out: Output) -> tuple[str, int]:
    payload, summary = {}, []
    if "family" in cfg.data:
        fam = cfg.data["family"]
        conv = families.example_tail_families(fam["kind"], fam["params"], fam.get("direction", "moments->tail"),
                                              fam.get("d", 0))
        payload["family"] = conv
        summary.append(f"family {fam['kind']} converted")
    if "kernel" in cfg.data:
        pset, psi, norm, _, _ = _norm_payload(cfg)
        env = tail_envelope(psi, norm)
        xs = np.asarray(cfg.data.get("x_grid", np.round(np.linspace(0.0, 12.0, 121), 6)), dtype=float)
        exact = kernel_tail(pset.kernel, pset.kernel.dist, xs, cfg.cap)
        envelope = env(xs)
        payload["kernel"] = {"gls_norm": norm, "threshold": math.e * norm,
                             "exceedances": int(np.sum((xs > math.e * norm) & (exact > envelope)))}
        out.add("tail.csv", _csv_text(["x", "envelope", "empirical_tail"], zip(xs, envelope, exact)))
        summary.append(f"{payload['kernel']['exceedances']} exceedances above x = {math.e * norm:.4g}")
    if not payload:
        raise ConfigError("tail needs a 'kernel' or a 'family' entry")
    out.add("tail.json", dumps(payload))
    return "; ".join(summary), EXIT_OK


def _plan(cfg: RunConfig) -> montecarlo.SimulationPlan:
    cfg.require("kernel", "ns")
    d = cfg.data
    kw = {k: tuple(d[k]) for k in ("ps", "x_grid") if k in d}
    if "replications" in d:
        kw["replications"] = d["replications"]
    return montecarlo.SimulationPlan(cfg.kernel(), cfg.dist(), tuple(d["ns"]), seed=cfg.master_seed, **kw)


def _curves(report: dict) -> str:
    rows = ((e["n"], t["x"], t["envelope_uniform"], t["tail"], t["se"], t["envelope_markov"])
            for e in report["per_n"] for t in e["tails"])
    return _csv_text(["n", "x", "envelope", "empirical_tail", "se", "envelope_markov"], rows)


def _run_simulation(cfg: RunConfig) -> dict:
    plan = _plan(cfg)
    return montecarlo.build_report(plan, montecarlo.simulate(plan, cfg.workers)).to_dict()


def cmd_simulate(cfg: RunConfig, out: Output) -> tuple[str, int]:
    report = _run_simulation(cfg)
    out.add("report.json", dumps(report))
    out.add("curves.csv", _curves(report))
    m2 = ", ".join(f"n={e['n']}: {e['second_moment']['estimate']:.4f}" for e in report["per_n"])
    return f"simulated; |U/sigma|_2 {m2}", EXIT_OK


def cmd_verify(cfg: RunConfig, out: Output, report_path: str | None = None) -> tuple[str, int]:
    if report_path is not None:
        try:
            report = json.loads(Path(report_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load report {report_path}: {exc}") from exc
    else:
        report = _run_simulation(cfg)
        out.add("report.json", dumps(report))
        out.add("curves.csv", _curves(report))
    scale = NEGATIVE_CONTROL_SCALE if cfg.negative_control else 1.0
    verdicts = montecarlo.verify(report, scale)
    failed = [v for v in verdicts if not v.passed]
    out.add("verdicts.json", dumps({"scale": scale, "passed": not failed, "verdicts": [v.to_dict() for v in verdicts]}))
    summary = f"{len(verdicts) - len(failed)}/{len(verdicts)} PASS"
    if failed:
        first = failed[0]
        summary += f"; first FAIL: {first.kind} n={first.n} at={first.at}"
    return summary, EXIT_FAIL if failed else EXIT_OK


COMMANDS = {
    "constants": cmd_constants, "decompose": cmd_decompose, "variance": cmd_variance, "bound": cmd_bound,
    "norm": cmd_norm, "tail": cmd_tail, "simulate": cmd_simulate, "verify": cmd_verify,
}
MAIN_FILE = {"constants": "constants.json", "decompose": "decompose.json", "variance": "variance.json",
             "bound": "bound.json", "norm": "norm.json", "tail": "tail.json", "simulate": "report.json",
             "verify": "verdicts.json"}


def _u64(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2^64)")
    return v


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ustatbounds", description="U-statistic moment and tail bounds with empirical checks.",
                     epilog="exit codes: 0 ok, 1 invalid input, 2 computation error, 3 verify FAIL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name], description=HELP[name],
                           epilog=f"example:\n  {EXAMPLES[name]}", formatter_class=argparse.RawDescriptionHelpFormatter)
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--seed", type=_u64, metavar="U64", help="master seed (overrides the config)")
        p.add_argument("--workers", type=_positive, default=1, metavar="N",
                       help="worker processes for simulation; never changes outputs")
        p.add_argument("--out", metavar="DIR", help="write result files here instead of printing JSON")
        p.add_argument("--negative-control", action="store_true",
                       help="halve every theoretical ceiling (verify only); must yield FAILs")
        if name == "verify":
            p.add_argument("--report", metavar="PATH", help="verify an existing report.json instead of simulating")
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand and return the exit code."""
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig(args.command, load_config(args.config), args.seed, args.workers,
                        Path(args.out) if args.out else None, args.negative_control)
        out = Output(cfg.out)
        handler = COMMANDS[args.command]
        if args.command == "verify":
            summary, code = handler(cfg, out, args.report)
        else:
            summary, code = handler(cfg, out)
        written = out.flush(MAIN_FILE[args.command])
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (UStatError, ArithmeticError, MemoryError) as exc:
        print(f"computation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    status = "FAIL" if code == EXIT_FAIL else "ok"
    where = f" -> {', '.join(written)}" if written else ""
    print(f"[{args.command}] {status}: {summary}{where}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())
