"""Acceptance criteria, one test each, at the stated tolerances.

Every criterion records a one-line verdict in ``RESULTS``; ``conftest.py``
prints them at the end of the pytest run, and running this file directly
prints them too. Ensemble data are computed once and shared between criteria.
"""

from __future__ import annotations

import os
import sys
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pytest

from mqsvt_spoof import cli
from mqsvt_spoof.benchmarks import (
    EnsembleConfig,
    analytic_f2_sum,
    analytic_gamma,
    analytic_sxq_lb,
    f_moment_report,
    gamma_sweep,
    mean_output_report,
    run_ensemble,
    sxq_estimate,
)
from mqsvt_spoof.circuit import ensemble_member
from mqsvt_spoof.moments import moment_mc, table_cases, tabulated_value
from mqsvt_spoof.paulipath import enumerate_path_sum
from mqsvt_spoof.simulator import full_distribution

WORKERS = int(os.environ.get("ACCEPTANCE_WORKERS", os.cpu_count() or 1))
GAMMAS = [round(0.1 * k, 1) for k in range(11)]

RESULTS: dict[int, str] = {}


@dataclass(frozen=True)
class Outcome:
    passed: bool
    detail: str


def _record(k: int, title: str, out: Outcome, seconds: float) -> Outcome:
    RESULTS[k] = f"[{'PASS' if out.passed else 'FAIL'}] {k}. {title}: {out.detail} ({seconds:.0f} s)"
    return out


def _timed(k: int, title: str):
    def wrap(fn):
        @lru_cache(maxsize=None)
        def run() -> Outcome:
            t0 = time.perf_counter()
            out = fn()
            return _record(k, title, out, time.perf_counter() - t0)

        return run

    return wrap


@lru_cache(maxsize=None)
def _ensemble(n: int, d_U: int, circuits: int, want_probs: bool = True) -> dict:
    return run_ensemble(EnsembleConfig(n=n, d_U=d_U, circuits=circuits, workers=WORKERS), want_probs=want_probs)


# -- criteria -------------------------------------------------------------------


@_timed(1, "moment tables, exact Weingarten vs tabulated, MC 2e5 within 3 SE")
def criterion_1() -> Outcome:
    mismatched = []
    mc_bad = []
    mc_exact_bad = []
    for i, case in enumerate(table_cases()):
        exact = [case.exact(inst) for inst in case.instances]
        tab = [tabulated_value(case, inst) for inst in case.instances]
        if any(e != t for e, t in zip(exact, tab)):
            mismatched.append(case.name)
        inst = case.representative
        est, se = moment_mc(inst[: case.t], inst[case.t :], case.t, 200_000, i)
        for ref, sink in ((float(tab[0]), mc_bad), (float(exact[0]), mc_exact_bad)):
            if not (abs(est - ref) <= 3 * se if se > 0 else est == ref):
                sink.append(case.name)
    total = len(table_cases())
    ok = not mismatched and not mc_bad
    return Outcome(ok, f"{total - len(mismatched)}/{total} cases equal the table exactly, "
                       f"{total - len(mc_bad)}/{total} MC estimates within 3 SE of the table "
                       f"({total - len(mc_exact_bad)}/{total} of the Weingarten value)")


@_timed(2, "path-sum completeness, n+1=2, d=1, d_U in {1,2}, 20 circuits, tol 1e-9")
def criterion_2() -> Outcome:
    worst = 0.0
    for d_U in (1, 2):
        for i in range(20):
            c = ensemble_member(2, d_U, 1, 0, i)
            p = full_distribution(c).probs[0]
            for x in range(2):
                worst = max(worst, abs(enumerate_path_sum(c, x) - p[x]))
    return Outcome(worst <= 1e-9, f"max |sum_s F - p| = {worst:.2e}")


@_timed(3, "E[F(U,r,x)] = 0 within 3 sigma, n=3, d_U in {1,2}, 1e5 circuits")
def criterion_3() -> Outcome:
    parts = []
    ok = True
    for d_U in (1, 2):
        cfg = EnsembleConfig(n=3, d_U=d_U, circuits=100_000)
        rep = f_moment_report(cfg, _ensemble(3, d_U, 100_000))["mean_F"]
        ok &= rep.verdict == "pass"
        parts.append(f"d_U={d_U}: {rep.estimate:.2e} +- {rep.stderr:.1e}")
    return Outcome(ok, "; ".join(parts))


@_timed(4, "sum_x E[F^2] vs (2^n-1)/2^(2(n+1)) gamma(d_U) within 3 sigma, gamma(1) = 95232/5160960")
def criterion_4() -> Outcome:
    ok = analytic_gamma(1) == Fraction(95232, 5160960)
    parts = [f"gamma(1) identity {'holds' if ok else 'broken'}"]
    for d_U in (1, 2):
        cfg = EnsembleConfig(n=3, d_U=d_U, circuits=100_000)
        rep = f_moment_report(cfg, _ensemble(3, d_U, 100_000))["sum_F2"]
        ok &= rep.verdict == "pass"
        parts.append(f"(3,{d_U}): {rep.estimate:.3e} +- {rep.stderr:.1e} vs {float(analytic_f2_sum(3, d_U)):.3e}")
    return Outcome(ok, "; ".join(parts))


@_timed(5, "sXQ > 0 at 3 sigma and >= analytic_sxq_lb - 3 sigma, 1e4 circuits")
def criterion_5() -> Outcome:
    lb_ok = abs(float(analytic_sxq_lb(3, 1)) - 0.0127) < 5e-5
    ok = lb_ok
    parts = [f"lb(3,1) = {float(analytic_sxq_lb(3, 1)):.5f}"]
    for n, d_U in ((3, 1), (5, 1), (5, 2)):
        cfg = EnsembleConfig(n=n, d_U=d_U, circuits=10_000)
        rep = sxq_estimate(cfg, data=_ensemble(n, d_U, 10_000))
        ok &= rep.verdict == "pass"
        parts.append(f"({n},{d_U}): {rep.estimate:.2e} +- {rep.stderr:.1e} vs lb {rep.analytic_reference:.2e}")
    return Outcome(ok, "; ".join(parts))


@_timed(6, "E[p(U,x)] = 2^-(n+1) within 3 sigma for every x, n=3, 1e5 circuits")
def criterion_6() -> Outcome:
    ok = True
    parts = []
    for d_U in (1, 2):
        cfg = EnsembleConfig(n=3, d_U=d_U, circuits=100_000)
        rep = mean_output_report(cfg, _ensemble(3, d_U, 100_000))
        bad = [r["x"] for r in rep.extra["per_x"] if not r["pass"]]
        ok &= not bad
        parts.append(f"d_U={d_U}: {8 - len(bad)}/8 x pass, worst x={rep.extra['worst_x']} "
                     f"{rep.estimate:.5f} +- {rep.stderr:.1e} vs {rep.analytic_reference:.5f}")
    return Outcome(ok, "; ".join(parts))


@lru_cache(maxsize=None)
def _sweep_data(d_U: int) -> dict:
    cfg = EnsembleConfig(n=3, d_U=d_U, circuits=10_000, workers=WORKERS)
    return run_ensemble(cfg, gammas=GAMMAS)


def _sweep(d_U: int, normalization: str) -> dict:
    cfg = EnsembleConfig(n=3, d_U=d_U, circuits=10_000)
    return gamma_sweep(cfg, GAMMAS, normalization=normalization, data=_sweep_data(d_U))


@_timed(7, "spoofer beats gamma=1 at 3 sigma and a crossover gamma* in (0,1) exists, n=3, 1e4 circuits")
def criterion_7() -> Outcome:
    ok = True
    parts = []
    for d_U in (1, 2):
        res = _sweep(d_U, "postselected")
        rows = {r["gamma"]: r for r in res["rows"]}
        full = rows[1.0]
        g_star = res["crossover"]
        good = full["spoofer_wins"] and g_star is not None and g_star > min(GAMMAS)
        ok &= good
        joint = _sweep(d_U, "joint")
        parts.append(f"d_U={d_U}: spoofer {full['spoof']:.5f} vs gamma=1 {full['noisy']:.5f} "
                     f"(diff {full['diff']:.1e} +- {full['diff_stderr']:.1e}), crossover {g_star} "
                     f"[joint scoring: crossover {joint['crossover']}, uniform guess {full['uniform']:.5f}]")
    return Outcome(ok, "; ".join(parts))


_DET_CASES = [
    ["moments", "verify", "--samples", "2000"],
    ["paths", "sum-check", "--circuits", "3"],
    ["paths", "f2", "--circuits", "3000"],
    ["sxq", "estimate", "--circuits", "3000"],
    ["sxes", "spoof", "--circuits", "3000", "--gamma", "0,0.5,1"],
    ["circuit", "dump", "--index", "3"],
]


@_timed(8, "every subcommand byte-identical across reruns at workers 1 and 8")
def criterion_8() -> Outcome:
    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for args in _DET_CASES:
            blobs = []
            for tag, w in (("a", 1), ("b", 8), ("c", 1)):
                out = Path(tmp) / f"{'_'.join(args[:2])}_{tag}.json"
                code = cli.main(args + ["--workers", str(w), "--out", str(out)])
                blobs.append((code, out.read_bytes()))
            if len(set(blobs)) != 1:
                bad.append(" ".join(args[:2]))
    return Outcome(not bad, f"{len(_DET_CASES) - len(bad)}/{len(_DET_CASES)} subcommands identical"
                            + (f", differing: {', '.join(bad)}" if bad else ""))


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


# -- pytest entry points --------------------------------------------------------


@pytest.mark.slow
@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_criterion(k):
    out = CRITERIA[k - 1]()
    assert out.passed, RESULTS[k]


if __name__ == "__main__":
    for k, fn in enumerate(CRITERIA, start=1):
        fn()
        print(RESULTS[k], flush=True)
    sys.exit(0 if all(fn().passed for fn in CRITERIA) else 1)
