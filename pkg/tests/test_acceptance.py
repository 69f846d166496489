"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The full check battery runs once per module with the default configuration;
criteria read their evidence from that report, and the determinism criterion
runs the battery a second time.
"""

import json
import math
import time

import pytest

from fockverify import cli
from fockverify import verify as V

pytestmark = pytest.mark.slow

NON_VOLATILE = ("version", "config", "config_sha256", "checks", "constants", "verdict")


@pytest.fixture(scope="module")
def full_run():
    t0 = time.perf_counter()
    report = cli.run_report(cli.RunConfig())
    # round trip through the serialised form so criteria see what a user sees
    text = json.dumps(report, indent=2)
    return json.loads(text), time.perf_counter() - t0


def checks(report, prefix):
    found = [c for c in report["checks"] if c["name"].startswith(prefix)]
    assert found, f"no check named {prefix}*"
    return found


def runtime(report, prefix):
    return sum(v for k, v in report["volatile"]["runtime_s"].items() if k.startswith(prefix))


def record(log, number, title, failures, summary):
    line = f"criterion {number} {'PASS' if not failures else 'FAIL'}: {title}: {summary}"
    if failures:
        line += " [" + "; ".join(failures) + "]"
    log.append(line)
    print(line)
    assert not failures, line


def test_criterion_01_closed_form_integrals(full_run, acceptance_log):
    report, _ = full_run
    (c,) = checks(report, "radial_integrals")
    d = c["details"]
    bad = []
    if c["status"] != "pass":
        bad.append(f"status {c['status']}")
    for key, want in (("k5", 2 * math.pi), ("k4_1", 2 * math.pi / 3)):
        if abs(d[key]["quadrature"] - want) > 1e-8 * want:
            bad.append(f"{key} = {d[key]['quadrature']!r}")
    if d["worst_shell_rel_error"] > 1e-8:
        bad.append(f"shell rel error {d['worst_shell_rel_error']:.3g}")
    k42 = d["k4_2"]["quadrature"]
    if not k42 < 5 * math.pi or abs(k42 - 5 * math.pi**2 / 8) > 1e-8 * k42:
        bad.append(f"k4_2 = {k42!r}")
    t = runtime(report, "radial_integrals")
    if t >= 1.0:
        bad.append(f"runtime {t:.2f}s")
    record(acceptance_log, 1, "closed-form integrals", bad, f"k4_2 = {k42:.6f} < 5pi, worst shell rel error {d['worst_shell_rel_error']:.1e}, {t:.3f}s")


def test_criterion_02_set_lemma(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    found = {c["name"]: c for c in checks(report, "set_lemma")}
    for n in (3, 4):
        c = found.get(f"set_lemma[n={n}]")
        if c is None:
            bad.append(f"n={n} missing")
            continue
        if c["status"] != "pass" or c["observed"] != 0:
            bad.append(f"n={n}: {c['observed']} violations")
        if c["details"]["trials"] < 100_000:
            bad.append(f"n={n}: only {c['details']['trials']} trials")
        if c["details"]["mutated_violations"] < 1:
            bad.append(f"n={n}: mutation control found nothing")
    t = runtime(report, "set_lemma")
    if t >= 30.0:
        bad.append(f"runtime {t:.1f}s")
    muts = ", ".join(str(c["details"]["mutated_violations"]) for c in found.values())
    record(acceptance_log, 2, "set lemma", bad, f"0 violations in 1e5 trials per n, mutated violations {muts}, {t:.2f}s")


def test_criterion_03_membership_oracle(full_run, acceptance_log):
    report, _ = full_run
    (c,) = checks(report, "F_membership_oracle")
    bad = []
    if c["status"] != "pass":
        bad.append(f"status {c['status']}")
    for n in ("1", "2", "3", "4"):
        row = c["details"].get(n)
        if row is None or row["points"] < 10_000 or row["disagreements"] != 0:
            bad.append(f"n={n}: {row}")
    t = runtime(report, "F_membership_oracle")
    if t >= 10.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 3, "F_n membership oracle", bad, f"0 disagreements on 1e4 points for n <= 4, {t:.2f}s")


def test_criterion_04_chi_support(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    found = {c["name"]: c for c in checks(report, "chi_support")}
    for m in (0, 1):
        c = found.get(f"chi_support[m={m}]")
        if c is None:
            bad.append(f"m={m} missing")
            continue
        if c["status"] != "pass":
            bad.append(f"m={m}: status {c['status']}")
        for n, row in c["details"]["sectors"].items():
            if row["outside_points"] < 1000 or row["nonzero_outside"] != 0:
                bad.append(f"m={m} n={n}: {row}")
    t = runtime(report, "chi_support")
    if t >= 10.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 4, "chi support", bad, f"exact zeros at 1e3 outside points per sector, {t:.2f}s")


def test_criterion_05_cancellation(full_run, acceptance_log):
    report, _ = full_run
    found = {c["name"]: c for c in checks(report, "cancellation")}
    bad = []
    c2 = found["cancellation[m=0,n=2]"]
    if c2["status"] != "pass" or c2["observed"] > 1e-9 or c2["details"]["points"] < 1000:
        bad.append(f"(0,2) residual {c2['observed']}")
    c4 = found["cancellation[m=0,n=4]"]
    d4 = c4["details"]
    if c4["status"] != "pass" or d4["simplified_terms"] != 0 or d4["simplified_nonzero_points"] != 0 or d4["points"] < 1000:
        bad.append(f"(0,4) not identically zero: {d4}")
    t = runtime(report, "cancellation[m=0,")
    if t >= 10.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 5, "cancellation identity", bad, f"(0,2) residual {c2['observed']:.1e}, (0,4) simplifies to 0 terms, {t:.2f}s")


def test_criterion_06_norm_recursion(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    found = {c["name"]: c for c in checks(report, "norm_recursion")}
    for m in (0, 1):
        c = found.get(f"norm_recursion[m={m}]")
        if c is None:
            bad.append(f"m={m} missing")
            continue
        if c["status"] != "pass":
            bad.append(f"m={m}: status {c['status']}")
        if c["details"]["n_samples"] < 100_000:
            bad.append(f"m={m}: {c['details']['n_samples']} samples")
        sectors = c["details"]["sectors"]
        if set(sectors) != {str(m + 2), str(m + 4)}:
            bad.append(f"m={m}: sectors {sorted(sectors)}")
        for n, row in sectors.items():
            if row["status"] != "pass":
                bad.append(f"m={m} n={n}: {row['status']} ({row['reason']})")
    t = runtime(report, "norm_recursion")
    if t >= 120.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 6, "norm recursion", bad, f"n in {{m+2, m+4}} within bound for m in {{0,1}} at 1e5 samples, {t:.1f}s")


def test_criterion_07_cutoff_symmetry(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    found = {c["name"]: c for c in checks(report, "cutoff_symmetry")}
    worst = 0.0
    for n in (1, 2):
        for R in (2, 10):
            c = found.get(f"cutoff_symmetry[n={n},R={R}]")
            if c is None:
                bad.append(f"n={n} R={R} missing")
                continue
            d = c["details"]
            diff = math.hypot(d["difference"]["re"], d["difference"]["im"])
            z = diff / d["combined_se"] if d["combined_se"] > 0 else (0.0 if diff == 0 else math.inf)
            worst = max(worst, z)
            if c["status"] != "pass" or z > 3.0 or not d["common_seed"]:
                bad.append(f"n={n} R={R}: mismatch {z:.2f} SE")
    t = runtime(report, "cutoff_symmetry")
    if t >= 60.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 7, "cutoff symmetry", bad, f"worst pairing mismatch {worst:.2f} combined SE, {t:.1f}s")


def test_criterion_08_symmetrizer(full_run, acceptance_log):
    report, _ = full_run
    (c,) = checks(report, "symmetrizer")
    d = c["details"]
    bad = []
    if c["status"] != "pass":
        bad.append(f"status {c['status']}")
    if d["contraction"]["status"] != "pass":
        bad.append("contraction")
    adj = d["adjoint"]
    if math.hypot(adj["difference"]["re"], adj["difference"]["im"]) > 3 * adj["se"]:
        bad.append("adjoint identity")
    if d["idempotence_residual"] > 1e-9:
        bad.append(f"idempotence {d['idempotence_residual']:.2g}")
    if d["commutation_residual"] > 1e-9:
        bad.append(f"commutation {d['commutation_residual']:.2g}")
    t = runtime(report, "symmetrizer")
    if t >= 30.0:
        bad.append(f"runtime {t:.1f}s")
    record(acceptance_log, 8, "symmetrizer suite", bad, f"commutation residual {d['commutation_residual']:.1e}, {t:.2f}s")


def test_criterion_09_lower_bound_ingredients(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    for c in checks(report, "lower_bound"):
        d = c["details"]
        if c["status"] != "pass":
            bad.append(f"{c['name']}: status {c['status']}")
        ps = [row["p"] for row in d["p_grid"]]
        if math.e**2 not in ps:
            bad.append("p = e^2 missing from grid")
        for row in d["p_grid"]:
            if not math.isfinite(row["log_margin"]) or row["identity_log_error"] > 1e-10:
                bad.append(f"p={row['p']}: {row}")
            if row["p"] >= c["observed"]["threshold"] and not row["inequality_holds"]:
                bad.append(f"inequality fails at p={row['p']}")
        idx = [row["i"] for row in d["annulus"]]
        if idx != list(range(11)) or d["worst_annulus_rel_error"] > 1e-10:
            bad.append(f"annulus: {d['worst_annulus_rel_error']}")
    t = runtime(report, "lower_bound")
    if t >= 1.0:
        bad.append(f"runtime {t:.2f}s")
    record(acceptance_log, 9, "lower-bound ingredients", bad, f"inequality from p = ln 2, annulus i <= 10 to 1e-10, {t:.3f}s")


def test_criterion_10_constants(full_run, acceptance_log):
    report, _ = full_run
    bad = []
    c1f, c1n, _ = V.constant_C1(0)
    c2f, c2n, _ = V.constant_C2(0)
    if abs(c1f - c1n) > 1e-10 * c1f:
        bad.append(f"C1 orders differ: {c1f!r} vs {c1n!r}")
    if abs(c2f - c2n) > 1e-10 * c2f:
        bad.append(f"C2 orders differ: {c2f!r} vs {c2n!r}")
    const = report["constants"]
    if const["C1"] != c1f or const["C2"] != c2f:
        bad.append("full-run report does not carry the constants")
    if not (const["C1"] > 0 and const["C2"] > 0 and all(v > 0 for v in const["C3_smallN"].values())):
        bad.append("non-positive constant")
    record(acceptance_log, 10, "constants", bad, f"C1 = {c1f:.12g}, C2 = {c2f:.12g}, orders agree to {max(abs(c1f - c1n) / c1f, abs(c2f - c2n) / c2f):.1e}")


def test_criterion_11_determinism(full_run, acceptance_log):
    report, _ = full_run
    second = json.loads(json.dumps(cli.run_report(cli.RunConfig()), indent=2))
    a = json.dumps({k: report[k] for k in NON_VOLATILE}, indent=2).encode()
    b = json.dumps({k: second[k] for k in NON_VOLATILE}, indent=2).encode()
    bad = [] if a == b else ["non-volatile sections differ"]
    if report["verdict"] != "pass":
        bad.append(f"full-run verdict {report['verdict']}")
    record(acceptance_log, 11, "determinism", bad, f"{len(a)} bytes identical across two full runs, verdict {report['verdict']}")
