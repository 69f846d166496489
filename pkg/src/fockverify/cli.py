"""Command-line front end: configuration, check orchestration and reports.

Exit codes: 0 when every selected check passed, 1 when any failed, 2 when
the worst outcome is inconclusive, 64 for usage or configuration errors and
74 when the report cannot be written.
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import hashlib
import json
import math
import os
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from . import verify as V
from .states import QuadratureSpec

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE, EXIT_IO = 0, 1, 2, 64, 74
SEED_ENV = "FOCKVERIFY_SEED"
GROUPS = ("integrals", "sets", "chi", "cancellation", "norms", "symmetry", "symmetrizer", "lowerbound", "density")


class ConfigError(ValueError):
    pass


# configuration ------------------------------------------------------------


@dataclass
class RunConfig:
    """Everything that determines a run; echoed verbatim into the report."""

    seed: int = 0
    checks: list[str] = field(default_factory=lambda: ["all"])
    norm_samples: int = 100_000
    pairing_samples: int = 40_000
    aminus_samples: int = 20_000
    set_n: list[int] = field(default_factory=lambda: [3, 4])
    set_trials: int = 100_000
    membership_points: int = 10_000
    membership_n_max: int = 4
    support_points: int = 1000
    chi_m: list[int] = field(default_factory=lambda: [0, 1])
    chi_sigma: float = 1.0
    chi_support_radius: float | None = 3.0
    d_radius_m0: float = 1.0
    R_prime: list[float] = field(default_factory=lambda: [6.0, 15.0, 30.0])
    cutoff_n: list[int] = field(default_factory=lambda: [1, 2])
    cutoff_R: list[float] = field(default_factory=lambda: [2.0, 10.0])
    cutoff_a: float = 1.0
    full_symmetry_pairs: list[list[int]] = field(default_factory=lambda: [[0, 0], [0, 1]])
    full_symmetry_tail_tol: float = 1e-3
    lower_bound_N: list[int] = field(default_factory=lambda: [1, 2])
    radial_panels: int = 12
    radial_order: int = 20
    angular_order: int = 12
    trunc_radius: float = 16.0
    jobs: int = 1
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigError(msg)

        ints = ("seed", "norm_samples", "pairing_samples", "aminus_samples", "set_trials", "membership_points", "membership_n_max", "support_points", "radial_panels", "radial_order", "angular_order", "jobs")
        for k in ints:
            v = getattr(self, k)
            need(isinstance(v, int) and not isinstance(v, bool), f"{k} must be an integer")
        need(self.seed >= 0, "seed must be non-negative")
        for k in ("norm_samples", "pairing_samples", "aminus_samples"):
            need(getattr(self, k) >= 2, f"{k} must be at least 2")
        need(self.set_trials >= 1 and self.membership_points >= 5 and self.support_points >= 1, "sample counts must be positive")
        need(1 <= self.membership_n_max <= 6, "membership_n_max must be in 1..6")
        need(self.jobs >= 1, "jobs must be at least 1")
        need(isinstance(self.checks, list) and all(isinstance(c, str) for c in self.checks), "checks must be a list of names")
        bad = [c for c in self.checks if c != "all" and c not in GROUPS]
        need(not bad, f"unknown check groups: {', '.join(bad)}")
        need(all(n in (3, 4, 5) for n in self.set_n), "set_n entries must be 3, 4 or 5")
        need(all(isinstance(m, int) and 0 <= m <= 4 for m in self.chi_m), "chi_m entries must be integers in 0..4")
        need(all(isinstance(n, int) and n >= 1 for n in self.cutoff_n), "cutoff_n entries must be positive integers")
        need(all(_num(R) and R >= 1 for R in self.cutoff_R), "cutoff_R entries must be >= 1")
        need(_num(self.cutoff_a) and self.cutoff_a >= 1, "cutoff_a must be >= 1")
        need(all(_num(r) and r > 0 for r in self.R_prime) and list(self.R_prime) == sorted(self.R_prime), "R_prime must be increasing and positive")
        need(_num(self.chi_sigma) and self.chi_sigma > 0, "chi_sigma must be positive")
        need(self.chi_support_radius is None or (_num(self.chi_support_radius) and self.chi_support_radius > 0), "chi_support_radius must be positive or null")
        need(_num(self.d_radius_m0) and self.d_radius_m0 > 0, "d_radius_m0 must be positive")
        need(all(isinstance(p, list) and len(p) == 2 for p in self.full_symmetry_pairs), "full_symmetry_pairs must hold pairs of base sectors")
        need(all(N in (1, 2) for N in self.lower_bound_N), "lower_bound_N entries must be 1 or 2")
        need(_num(self.trunc_radius) and self.trunc_radius > 0, "trunc_radius must be positive")
        need(self.output is None or isinstance(self.output, str), "output must be a path or null")

    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(self.radial_panels, self.radial_order, self.angular_order, float(self.trunc_radius))

    def to_dict(self) -> dict:
        return asdict(self)

    def selected(self, group: str) -> bool:
        return "all" in self.checks or group in self.checks


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def check_seed(master: int, key: str) -> int:
    """Per-check seed derived from the master seed and the check key."""
    return int(np.random.SeedSequence([master, zlib.crc32(key.encode())]).generate_state(1)[0])


# the registry -------------------------------------------------------------


@dataclass(frozen=True)
class PlannedCheck:
    key: str
    group: str
    func: Callable[..., V.CheckResult]
    kwargs: dict


def plan_checks(cfg: RunConfig) -> list[PlannedCheck]:
    """All selected checks in their declared order."""
    plan: list[PlannedCheck] = []

    def add(group, key, func, **kw):
        if cfg.selected(group):
            plan.append(PlannedCheck(key, group, func, kw))

    def chi_spec(m, n_max=None):
        d = cfg.d_radius_m0 if m == 0 else None
        return V.default_chi_spec(m, n_max, d, cfg.chi_sigma, cfg.chi_support_radius)

    s = cfg.seed
    quad = cfg.quad()
    add("integrals", "radial_integrals", V.check_radial_integrals)
    for n in cfg.set_n:
        key = f"set_lemma[n={n}]"
        add("sets", key, V.check_set_lemma, n=n, trials=cfg.set_trials, seed=check_seed(s, key))
    add("sets", "F_membership_oracle", V.check_F_membership, n_max=cfg.membership_n_max, points=cfg.membership_points, seed=check_seed(s, "F_membership_oracle"))
    for m in cfg.chi_m:
        key = f"chi_support[m={m}]"
        add("chi", key, V.check_chi_support, spec=chi_spec(m), seed=check_seed(s, key), points=cfg.support_points)
    for m in cfg.chi_m:
        for n in (m + 2, m + 4):
            key = f"cancellation[m={m},n={n}]"
            add("cancellation", key, V.check_cancellation, n=n, spec=chi_spec(m, n), seed=check_seed(s, key), points=cfg.support_points)
    for m in cfg.chi_m:
        key = f"norm_recursion[m={m}]"
        add("norms", key, V.check_norm_recursion, spec=chi_spec(m), seed=check_seed(s, key), n_samples=cfg.norm_samples)
    for m in cfg.chi_m:
        key = f"A_minus_term_bounds[m={m}]"
        add("norms", key, V.check_A_minus_term_bounds, m=m, seed=check_seed(s, key), n_samples=cfg.aminus_samples, quad=quad)
    add("norms", "A_plus_divergence", V.check_A_plus_divergence, seed=check_seed(s, "A_plus_divergence"), n_samples=cfg.aminus_samples)
    for n in cfg.cutoff_n:
        for R in cfg.cutoff_R:
            key = f"cutoff_symmetry[n={n},R={R:g}]"
            add("symmetry", key, V.check_cutoff_symmetry, n=n, R=float(R), a=float(cfg.cutoff_a), seed=check_seed(s, key), n_samples=cfg.pairing_samples, quad=quad)
    for a, b in cfg.full_symmetry_pairs:
        key = f"full_symmetry[m={a},m={b}]"
        add("symmetry", key, V.check_full_symmetry_truncated, m_phi=a, m_psi=b, seed=check_seed(s, key), n_samples=cfg.pairing_samples // 2, tail_tol=cfg.full_symmetry_tail_tol, quad=quad)
    add("symmetrizer", "symmetrizer", V.check_symmetrizer, seed=check_seed(s, "symmetrizer"), n_samples=cfg.pairing_samples, points=cfg.support_points)
    for N in cfg.lower_bound_N:
        add("lowerbound", f"lower_bound[N={N}]", V.check_lower_bound_ingredients, N_small=N)
    if 0 in cfg.chi_m or "density" in cfg.checks:
        key = "density_limit[m=0]"
        add(
            "density",
            key,
            V.check_density_limit,
            m=0,
            R_primes=tuple(float(r) for r in cfg.R_prime),
            seed=check_seed(s, key),
            n_samples=cfg.norm_samples,
            points=cfg.support_points,
            sigma=cfg.chi_sigma,
            support_radius=cfg.chi_support_radius,
        )
    return plan


def _run_one(pc: PlannedCheck) -> V.CheckResult:
    try:
        return pc.func(**pc.kwargs)
    except Exception as exc:  # a crashing check is reported, not fatal to the run
        return V.CheckResult(pc.key, V.INCONCLUSIVE, None, None, "check raised", None, pc.kwargs.get("seed"), {"error": f"{type(exc).__name__}: {exc}"})


def run_checks(plan: Sequence[PlannedCheck], jobs: int = 1) -> list[V.CheckResult]:
    """Results in plan order regardless of completion order."""
    if jobs <= 1 or len(plan) <= 1:
        return [_run_one(pc) for pc in plan]
    with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, plan))


# reports -------------------------------------------------------------------


def jsonable(x: Any) -> Any:
    """Plain JSON types; non-finite floats become strings, complex a re/im pair."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": jsonable(x.real), "im": jsonable(x.imag)}
    if x is None or isinstance(x, str):
        return x
    return str(x)


def overall_verdict(results: Sequence[V.CheckResult]) -> str:
    if not results:
        return "pass-vacuous"
    return V.worst_status([r.status for r in results])


def build_report(cfg: RunConfig, results: Sequence[V.CheckResult], constants: V.ConstantEstimates, wall: float) -> dict:
    conf = cfg.to_dict()
    digest = hashlib.sha256(json.dumps(jsonable(conf), sort_keys=True).encode()).hexdigest()
    return {
        "version": __version__,
        "config": jsonable(conf),
        "config_sha256": digest,
        "checks": [jsonable(r.to_dict()) for r in results],
        "constants": jsonable(constants.to_dict()),
        "verdict": overall_verdict(results),
        "volatile": {
            "runtime_s": {r.name: r.runtime_s for r in results},
            "wall_clock_s": wall,
        },
    }


def exit_code_for(verdict: str) -> int:
    return {"pass": EXIT_PASS, "pass-vacuous": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[verdict]


def _short(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        items = list(v.items())[:3]
        s = ", ".join(f"{k}={_short(x)}" for k, x in items)
        return "{" + s + (", ..." if len(v) > 3 else "") + "}"
    return str(v)


def render_text(report: dict) -> str:
    lines = [f"fockverify {report['version']}  config {report['config_sha256'][:12]}"]
    rows = [(c["name"], c["status"], _short(c["observed"])) for c in report["checks"]]
    w = max([len(r[0]) for r in rows] + [5])
    runtimes = report.get("volatile", {}).get("runtime_s", {})
    lines.append(f"{'check':<{w}}  {'status':<12}  {'runtime':>8}  observed")
    for name, status, obs in rows:
        rt = runtimes.get(name)
        rts = f"{rt:8.2f}" if isinstance(rt, (int, float)) else f"{'':>8}"
        lines.append(f"{name:<{w}}  {status:<12}  {rts}  {obs}")
    c = report["constants"]
    c3 = ", ".join(f"N={k}: {v:.12g}" for k, v in c["C3_smallN"].items())
    lines.append(f"constants: C1={c['C1']:.12g}  C2={c['C2']:.12g}  C3_smallN: {c3}")
    lines.append(f"verdict: {report['verdict']}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, path: str | None, fmt: str = "json") -> None:
    """Write to ``path`` or stdout; raises OSError on I/O failure."""
    text = json.dumps(report, indent=2, sort_keys=False) + "\n" if fmt == "json" else render_text(report)
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


# argument parsing -----------------------------------------------------------


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--output", "-o", help="report path (default: stdout)")
    common.add_argument("--format", choices=("json", "text"), default=None, help="report format")
    common.add_argument("--jobs", "-j", type=int, help="worker processes")
    common.add_argument("--samples", type=int, help="Monte Carlo samples for norm estimates")

    p = _Parser(prog="fockverify", description="Numerical checks for a Fock-space interaction operator.")
    p.add_argument("--version", action="version", version=f"fockverify {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", parents=[common], help="run checks")
    v.add_argument("group", choices=("all",) + GROUPS)
    v.add_argument("--n", type=int, action="append", help="photon number(s) for sets and symmetry groups")
    v.add_argument("--m", type=int, action="append", help="base sector(s) for chi-based groups")
    v.add_argument("--trials", type=int, help="constructive samples for the set lemma")
    v.add_argument("--R", type=float, action="append", help="cutoff radius for the symmetry group")

    c = sub.add_parser("constants", parents=[common], help="print the constants")
    c.add_argument("--m", type=int, default=0, help="base sector for the series")

    r = sub.add_parser("report", parents=[common], help="run every check or re-render a saved report")
    r.add_argument("--input", help="existing JSON report to render")
    return p


def config_from_args(args) -> RunConfig:
    d = load_config(args.config)
    cfg = RunConfig.from_dict(d) if d else RunConfig()
    env = os.environ.get(SEED_ENV)
    if env is not None and "seed" not in d:
        try:
            cfg.seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.samples is not None:
        cfg.norm_samples = args.samples
    if args.output is not None:
        cfg.output = args.output
    if getattr(args, "group", None):
        cfg.checks = [args.group]
    if getattr(args, "n", None):
        if args.group in ("sets", "all"):
            cfg.set_n = list(args.n)
        if args.group in ("symmetry", "all"):
            cfg.cutoff_n = list(args.n)
    if getattr(args, "m", None) and args.command == "verify":
        cfg.chi_m = list(args.m)
    if getattr(args, "trials", None) is not None:
        cfg.set_trials = args.trials
    if getattr(args, "R", None):
        cfg.cutoff_R = list(args.R)
    cfg.validate()
    return cfg


def run_report(cfg: RunConfig) -> dict:
    t0 = time.perf_counter()
    results = run_checks(plan_checks(cfg), cfg.jobs)
    constants = V.estimate_constants()
    return build_report(cfg, results, constants, time.perf_counter() - t0)


def main(argv: Sequence[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = config_from_args(args)
    except (ConfigError, TypeError) as exc:
        print(f"fockverify: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    fmt = args.format or ("text" if args.command == "constants" else "json")
    if args.command == "constants":
        est = V.estimate_constants(m=args.m)
        chk = V.check_constants(m=args.m)
        out = {"constants": jsonable(est.to_dict()), "check": jsonable(chk.to_dict())}
        text = json.dumps(out, indent=2) + "\n" if fmt == "json" else (
            f"C1 = {est.C1:.15g}\nC2 = {est.C2:.15g}\n" + "".join(f"C3_smallN[N={k}] = {v:.15g}\n" for k, v in sorted(est.C3_smallN.items())) + f"summation orders agree: {chk.status}\n"
        )
        return _emit(text, cfg.output, EXIT_PASS if chk.status == V.PASS else EXIT_FAIL)

    if args.command == "report" and args.input:
        try:
            with open(args.input, encoding="utf-8") as fh:
                report = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"fockverify: cannot read report: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        report = run_report(cfg)
    try:
        write_report(report, cfg.output, fmt)
    except OSError as exc:
        print(f"fockverify: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return exit_code_for(report["verdict"])


def _emit(text: str, path: str | None, code: int) -> int:
    try:
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"fockverify: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
