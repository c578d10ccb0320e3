"""Scores, ensemble estimators and closed-form reference curves.

Ensemble work is split into fixed-size chunks of consecutive circuit indices.
Chunks are independent (every circuit has its own seed stream) and are reduced in
index order, so results do not depend on the number of worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .circuit import NoiseSpec, ensemble_member, sample_ensemble
from .moments import T4_DENOMINATOR, moment_t4_weingarten
from .paulipath import canonical_coefficients
from .simulator import density_probabilities, ensemble_probabilities, noisy_distribution
from .stats import DEFAULT_BATCHES, MIN_BATCHES, batch_means, positive_at, within_sigma

CHUNK = 1024
HOG_FRACTION = Fraction(2, 3)


# -- scores ---------------------------------------------------------------------


def _aligned(p: Mapping, p_exp: Mapping) -> list:
    keys = [k for k in p if not _is_zero(k)]
    other = [k for k in p_exp if not _is_zero(k)]
    if set(keys) != set(other):
        raise ValueError("p and p_exp are defined on different sets of outputs")
    return sorted(keys, key=str)


def _is_zero(x) -> bool:
    if isinstance(x, str):
        return set(x) <= {"0"}
    return int(x) == 0


def sxes_score(p: Mapping, p_exp: Mapping) -> float:
    """sum over x != 0 of p(x) p_exp(x); ``p_exp`` may be signed."""
    keys = _aligned(p, p_exp)
    return float(sum(float(p[k]) * float(p_exp[k]) for k in keys))


def xeb_score(p: Mapping, p_exp: Mapping, n: int) -> float:
    return 2.0**n * sxes_score(p, p_exp) - 1.0


def xhog_check(strings: Sequence[str], p: Mapping, b: float, n: int) -> bool:
    """(1/k) sum_j p(x_j) > b / 2^n for distinct nonzero strings."""
    if b <= 1:
        raise ValueError("threshold b must exceed 1")
    if len(set(strings)) != len(strings):
        raise ValueError("strings must be distinct")
    if any(_is_zero(s) for s in strings):
        raise ValueError("the all-zero string is excluded")
    mean = sum(float(p[s]) for s in strings) / len(strings)
    return mean > b / 2.0**n


def hog_check(strings: Sequence[str], p: Mapping, median: float) -> bool:
    """At least 2/3 of the strings have probability above ``median``."""
    if median < 0:
        raise ValueError("median must be non-negative")
    if not strings:
        return False
    above = sum(1 for s in strings if float(p[s]) > median)
    return Fraction(above, len(strings)) >= HOG_FRACTION


def xq_formula(p0: np.ndarray, q0: np.ndarray, n: int) -> float:
    """2^{2n} (E[(p - 2^-n)^2] - E[(p - q)^2]) for the all-zero output over an ensemble."""
    p0 = np.asarray(p0, dtype=float)
    q0 = np.asarray(q0, dtype=float)
    return float(2.0 ** (2 * n) * (np.mean((p0 - 2.0**-n) ** 2) - np.mean((p0 - q0) ** 2)))


# -- closed forms ---------------------------------------------------------------

TAB_FIRST = 95232  # tabulated (ZZ, ZI, ZZ, ZI -> ZI^4) numerator
TAB_REPEAT = 90048  # tabulated ZI^4 -> ZI^4 numerator
TAB_CROSS_A = 178304
TAB_CROSS_B = 602048
TAB_CROSS_C = 242560
TAB_CROSS_D = 168896


def analytic_gamma(d_U: int) -> Fraction:
    """(2^8 Delta)^-d_U * 95232 * 90048^(d_U - 1), from the tabulated moments."""
    if d_U < 1:
        raise ValueError("d_U must be >= 1")
    return Fraction(TAB_FIRST * TAB_REPEAT ** (d_U - 1), T4_DENOMINATOR**d_U)


def weingarten_gamma(d_U: int) -> Fraction:
    """The same product built from exact Weingarten moments."""
    if d_U < 1:
        raise ValueError("d_U must be >= 1")
    first = moment_t4_weingarten("ZZ", "ZI", "ZZ", "ZI", "ZI", "ZI", "ZI", "ZI").value
    rep = moment_t4_weingarten("ZI", "ZI", "ZI", "ZI", "ZI", "ZI", "ZI", "ZI").value
    return first * rep ** (d_U - 1)


def analytic_f2_sum(n: int, d_U: int, gamma: Fraction | None = None) -> Fraction:
    """sum_{x != 0} E[F(U, r, x)^2] = (2^n - 1) gamma / 2^{2(n+1)}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = analytic_gamma(d_U) if gamma is None else gamma
    return Fraction(2**n - 1, 2 ** (2 * (n + 1))) * g


def _cross_numerator(n: int, d_U: int) -> int:
    h = 2 ** (n - 1)
    return (h - 1) * TAB_CROSS_A * TAB_CROSS_B ** (d_U - 1) + (h * TAB_CROSS_C - 2 * TAB_CROSS_D) * TAB_REPEAT ** (d_U - 1)


def analytic_cross_term_lb(n: int, d_U: int) -> Fraction:
    """Lower bound on sum_{x != 0} sum_{s != r} E[F_s F_r] built from the tabulated moments."""
    if n < 2:
        raise ValueError("the cross-term bound is stated for n >= 2")
    if d_U < 1:
        raise ValueError("d_U must be >= 1")
    return Fraction(_cross_numerator(n, d_U), 2 ** (2 * n + 2) * T4_DENOMINATOR**d_U)


def analytic_sxq_lb(n: int, d_U: int) -> Fraction:
    """Two-term lower bound on sXQ (2^{2n}-prefixed form) as a function of (n, d_U)."""
    if n < 2:
        raise ValueError("the sXQ bound is stated for n >= 2")
    if d_U < 1:
        raise ValueError("d_U must be >= 1")
    den = T4_DENOMINATOR**d_U
    first = Fraction(2**n - 1, 4) * Fraction(TAB_FIRST * TAB_REPEAT ** (d_U - 1), den)
    second = Fraction(_cross_numerator(n, d_U), 4 * den)
    return (first + second) / (2**n - 1)


def analytic_sxq_lb_terms(n: int, d_U: int) -> tuple[Fraction, Fraction]:
    den = T4_DENOMINATOR**d_U
    first = Fraction(TAB_FIRST * TAB_REPEAT ** (d_U - 1), 4 * den)
    second = Fraction(_cross_numerator(n, d_U), 4 * den * (2**n - 1))
    return first, second


# -- ensemble machinery ---------------------------------------------------------


@dataclass(frozen=True)
class EnsembleConfig:
    """Ensemble of single-register-ancilla mQSVT circuits; x is uniform over x != 0^n."""

    n: int
    d_U: int
    d: int = 1
    circuits: int = 10_000
    master_seed: int = 0
    batches: int = DEFAULT_BATCHES
    workers: int = 1
    phases: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 1 or (self.n + 1) % 2:
            raise ValueError(f"n + 1 must be even and n >= 1, got n={self.n}")
        if self.d_U < 1 or self.d < 1:
            raise ValueError("d_U and d must be >= 1")
        if self.circuits < 1:
            raise ValueError("circuits must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.phases is not None and len(self.phases) != 2 * self.d + 1:
            raise ValueError(f"expected {2 * self.d + 1} phases")

    @property
    def n_plus_1(self) -> int:
        return self.n + 1

    def to_dict(self) -> dict:
        doc = asdict(self)
        # Worker count never changes results, so it stays out of reports.
        del doc["workers"]
        doc["phases"] = None if self.phases is None else list(self.phases)
        doc["architecture_distribution"] = "uniform perfect matching per layer"
        doc["x_sampling"] = "uniform over nonzero x"
        return doc


@dataclass
class BenchmarkReport:
    quantity: str
    n: int
    d_U: int
    d: int
    estimate: float
    stderr: float
    samples: int
    seed: int
    normalization: str = ""
    gamma: float | None = None
    analytic_reference: float | None = None
    verdict: str | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = asdict(self)
        if doc["gamma"] is None:
            del doc["gamma"]
        if doc["analytic_reference"] is None:
            del doc["analytic_reference"]
        return doc


def _chunk_job(args) -> dict[str, np.ndarray]:
    n_plus_1, d_U, d, phases, seed, start, count, want_probs, gammas, layer_set = args
    batch = sample_ensemble(n_plus_1, d_U, d, seed, start, count, phases)
    out = {"F": canonical_coefficients(batch)}
    if want_probs:
        out["p"] = np.ascontiguousarray(ensemble_probabilities(batch)[:, 0, :])
    for i, g in enumerate(gammas):
        probs = density_probabilities(batch, NoiseSpec(g, layer_set))
        out[f"noisy{i}"] = np.ascontiguousarray(probs[:, 0, :])
    return out


def run_ensemble(
    cfg: EnsembleConfig,
    want_probs: bool = True,
    gammas: Sequence[float] = (),
    layer_set: str = "all",
) -> dict[str, np.ndarray]:
    """Per-circuit arrays for circuits ``0 .. cfg.circuits - 1``.

    Keys: ``F`` (shape (C,)), ``p`` (top-zero joint probabilities, (C, 2^n)) and
    ``noisy{i}`` (top-zero joint noisy probabilities at ``gammas[i]``, exact).
    """
    jobs = [
        (cfg.n_plus_1, cfg.d_U, cfg.d, cfg.phases, cfg.master_seed, lo, min(CHUNK, cfg.circuits - lo),
         want_probs, tuple(gammas), layer_set)
        for lo in range(0, cfg.circuits, CHUNK)
    ]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            parts = list(ex.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(j) for j in jobs]
    # Contiguous output: reductions must not depend on whether chunks came back pickled.
    return {k: np.ascontiguousarray(np.concatenate([p[k] for p in parts])) for k in parts[0]}


def _check_budget(cfg: EnsembleConfig):
    if cfg.batches < MIN_BATCHES:
        raise ValueError(f"need at least {MIN_BATCHES} batches")
    if cfg.circuits < cfg.batches:
        raise ValueError(f"{cfg.circuits} circuits are too few for {cfg.batches} batches")


def _ff(v) -> float:
    return float(v)


# -- estimators -----------------------------------------------------------------


def per_circuit_sxq(p: np.ndarray, q: np.ndarray, n: int) -> np.ndarray:
    """2^{2n} mean_{x != 0} [(p - 2^-n)^2 - (p - q)^2] for each circuit."""
    pn = p[:, 1:]
    qn = q[:, 1:]
    return 2.0 ** (2 * n) * (np.mean((pn - 2.0**-n) ** 2, axis=1) - np.mean((pn - qn) ** 2, axis=1))


def sxq_estimate(cfg: EnsembleConfig, estimator: str = "pauli_path", data: dict | None = None) -> BenchmarkReport:
    """Ensemble sXQ with exact p from the simulator and q from the chosen estimator.

    ``estimate`` carries the 2^{2n} prefactor; ``extra['main_text_form']`` is
    the same quantity divided by 2^{2n}.
    """
    _check_budget(cfg)
    if estimator not in ("pauli_path", "trivial"):
        raise ValueError(f"unknown estimator {estimator!r}")
    n = cfg.n
    data = run_ensemble(cfg) if data is None else data
    p = data["p"]
    if estimator == "trivial":
        q = np.full_like(p, 2.0**-n)
    else:
        q = 2.0**-n + data["F"][:, None] * np.ones_like(p)
    vals = per_circuit_sxq(p, q, n)
    est, se = batch_means(vals, cfg.batches)
    extra = {
        "estimator": estimator,
        "main_text_form": est / 4.0**n,
        "main_text_stderr": se / 4.0**n,
        "config": cfg.to_dict(),
    }
    ref = None
    verdict = None
    if estimator == "pauli_path":
        f = data["F"]
        pf = np.sum(p[:, 1:], axis=1) * f
        f2 = (2**n - 1) * f**2
        extra["sum_pF"] = list(batch_means(pf, cfg.batches))
        extra["sum_F2"] = list(batch_means(f2, cfg.batches))
        extra["mean_F"] = list(batch_means(f, cfg.batches))
        extra["analytic_f2_sum"] = _ff(analytic_f2_sum(n, cfg.d_U))
        extra["weingarten_f2_sum"] = _ff(analytic_f2_sum(n, cfg.d_U, weingarten_gamma(cfg.d_U)))
        if cfg.d == 1 and n >= 2:
            ref = _ff(analytic_sxq_lb(n, cfg.d_U))
            ok = positive_at(est, se) and est >= ref - 3 * se
            verdict = "pass" if ok else "fail"
    else:
        verdict = "pass" if est == 0.0 else "fail"
        ref = 0.0
    return BenchmarkReport(
        quantity="sXQ", n=n, d_U=cfg.d_U, d=cfg.d, estimate=est, stderr=se, samples=cfg.circuits,
        seed=cfg.master_seed, normalization="2^{2n} prefactor (main_text_form divides by 2^{2n})",
        analytic_reference=ref, verdict=verdict, extra=extra,
    )


def f_moment_report(cfg: EnsembleConfig, data: dict | None = None) -> dict[str, BenchmarkReport]:
    """Ensemble E[F(U, r, x)] and sum_{x != 0} E[F^2] against the closed forms."""
    _check_budget(cfg)
    n = cfg.n
    data = run_ensemble(cfg, want_probs=False) if data is None else data
    f = data["F"]
    m1, s1 = batch_means(f, cfg.batches)
    m2, s2 = batch_means((2**n - 1) * f**2, cfg.batches)
    ref2 = _ff(analytic_f2_sum(n, cfg.d_U)) if cfg.d == 1 else None
    mean_rep = BenchmarkReport(
        "mean_F", n, cfg.d_U, cfg.d, m1, s1, cfg.circuits, cfg.master_seed, "per x (independent of x)",
        analytic_reference=0.0, verdict="pass" if within_sigma(m1, 0.0, s1) else "fail",
    )
    f2_rep = BenchmarkReport(
        "sum_F2", n, cfg.d_U, cfg.d, m2, s2, cfg.circuits, cfg.master_seed, "sum over x != 0",
        analytic_reference=ref2,
        verdict=None if ref2 is None else ("pass" if within_sigma(m2, ref2, s2) else "fail"),
        extra={"weingarten_reference": _ff(analytic_f2_sum(n, cfg.d_U, weingarten_gamma(cfg.d_U)))},
    )
    return {"mean_F": mean_rep, "sum_F2": f2_rep}


def mean_output_report(cfg: EnsembleConfig, data: dict | None = None) -> BenchmarkReport:
    """E_U[p(U, x)] for every x against 2^-(n+1)."""
    _check_budget(cfg)
    n = cfg.n
    data = run_ensemble(cfg) if data is None else data
    p = data["p"]
    ref = 2.0 ** -(n + 1)
    rows = []
    ok = True
    for x in range(2**n):
        m, s = batch_means(p[:, x], cfg.batches)
        good = within_sigma(m, ref, s)
        ok &= good
        rows.append({"x": format(x, f"0{n}b"), "mean": m, "stderr": s, "pass": good})
    worst = max(rows, key=lambda r: abs(r["mean"] - ref) / max(r["stderr"], 1e-300))
    return BenchmarkReport(
        "mean_p", n, cfg.d_U, cfg.d, worst["mean"], worst["stderr"], cfg.circuits, cfg.master_seed,
        "joint probability with top bit 0", analytic_reference=ref, verdict="pass" if ok else "fail",
        extra={"per_x": rows, "worst_x": worst["x"]},
    )


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    spoof: float
    spoof_stderr: float
    noisy: float
    noisy_stderr: float
    diff: float
    diff_stderr: float
    spoofer_wins: bool
    uniform: float


P_EXP_NORMALIZATIONS = ("postselected", "joint")


def noisy_scoring_distribution(top: np.ndarray, normalization: str) -> np.ndarray:
    """Noisy top-zero joint probabilities in the form the noisy device is scored with.

    ``postselected`` conditions on the top register reading 0, so the noisy
    distribution over x sums to 1 like q does. ``joint`` uses the unconditioned
    probabilities, which sum to the top-zero mass.
    """
    if normalization == "postselected":
        return top / top.sum(axis=1, keepdims=True)
    if normalization == "joint":
        return top
    raise ValueError(f"normalization must be one of {P_EXP_NORMALIZATIONS}")


def _sweep_rows(
    data: dict, gammas: Sequence[float], n: int, batches: int, normalization: str = "postselected"
) -> list[SweepRow]:
    p = data["p"][:, 1:]
    q = 2.0**-n + data["F"][:, None]
    spoof = np.sum(p * q, axis=1)
    s_m, s_se = batch_means(spoof, batches)
    # Score of the uniform guess 2^-n; the spoofer beats it only through sum_x p F.
    u_m, _ = batch_means(2.0**-n * np.sum(p, axis=1), batches)
    rows = []
    for i, g in enumerate(gammas):
        pe = noisy_scoring_distribution(data[f"noisy{i}"], normalization)
        noisy = np.sum(p * pe[:, 1:], axis=1)
        n_m, n_se = batch_means(noisy, batches)
        d_m, d_se = batch_means(spoof - noisy, batches)
        rows.append(SweepRow(float(g), s_m, s_se, n_m, n_se, d_m, d_se, positive_at(d_m, d_se), u_m))
    return rows


def crossover(rows: Sequence[SweepRow]) -> float | None:
    """Smallest grid gamma from which the spoofer wins at every larger gamma."""
    best = None
    for row in sorted(rows, key=lambda r: r.gamma, reverse=True):
        if not row.spoofer_wins:
            break
        best = row.gamma
    return best


def sxes_spoof_experiment(
    cfg: EnsembleConfig,
    noise: NoiseSpec,
    trajectories: int = 0,
    data: dict | None = None,
    normalization: str = "postselected",
) -> tuple[BenchmarkReport, BenchmarkReport]:
    """(spoofer sXES, noisy-circuit sXES) at one noise strength.

    The spoofer scores with the raw q. The noisy circuit scores with its output
    distribution over x (postselected or joint, see ``noisy_scoring_distribution``), computed exactly from the density matrix
    when ``trajectories == 0`` and by trajectory sampling otherwise. The verdict
    compares the paired per-circuit difference at 3 sigma.
    """
    if cfg.d != 1:
        raise ValueError("the sXES comparison is defined for single-block circuits")
    _check_budget(cfg)
    n = cfg.n
    noisy_scoring_distribution(np.ones((1, 1)), normalization)
    if data is None:
        if trajectories:
            data = run_ensemble(cfg)
            noisy = []
            for i in range(cfg.circuits):
                c = ensemble_member(cfg.n_plus_1, cfg.d_U, cfg.d, cfg.master_seed, i, cfg.phases)
                dist = noisy_distribution(c, noise, trajectories, seed=cfg.master_seed + i)
                noisy.append(dist.probs[0])
            data["noisy0"] = np.array(noisy)
        else:
            data = run_ensemble(cfg, gammas=[noise.gamma], layer_set=noise.layer_set)
    row = _sweep_rows(data, [noise.gamma], n, cfg.batches, normalization)[0]
    p_sum = np.sum(data["p"][:, 1:], axis=1)
    ps_m, _ = batch_means(p_sum, cfg.batches)
    threshold = 2.0**-n * ps_m + _ff(analytic_cross_term_lb(n, cfg.d_U)) if n >= 2 else None
    verdict = "pass" if row.spoofer_wins else "fail"
    common = {"config": cfg.to_dict(), "noise_layer_set": noise.layer_set,
              "noisy_method": "trajectories" if trajectories else "density", "trajectories": trajectories,
              "p_exp_normalization": normalization}
    spoof = BenchmarkReport(
        "sXES_spoofer", n, cfg.d_U, cfg.d, row.spoof, row.spoof_stderr, cfg.circuits, cfg.master_seed,
        "raw q", gamma=noise.gamma, analytic_reference=threshold, verdict=verdict,
        extra={**common, "diff": row.diff, "diff_stderr": row.diff_stderr, "uniform_term": 2.0**-n * ps_m},
    )
    noisy_rep = BenchmarkReport(
        "sXES_noisy", n, cfg.d_U, cfg.d, row.noisy, row.noisy_stderr, cfg.circuits, cfg.master_seed,
        f"{normalization} noisy distribution", gamma=noise.gamma, verdict=verdict, extra=common,
    )
    return spoof, noisy_rep


def gamma_sweep(
    cfg: EnsembleConfig,
    gammas: Sequence[float],
    layer_set: str = "all",
    normalization: str = "postselected",
    data: dict | None = None,
) -> dict:
    """Spoofer vs noisy sXES over a grid of noise strengths, with the empirical crossover.

    ``data`` may hold a ``run_ensemble`` result computed with the same ``gammas``
    and ``layer_set``, so that both normalizations can share one ensemble.
    """
    if not gammas:
        raise ValueError("empty gamma list")
    for g in gammas:
        NoiseSpec(g, layer_set)
    if cfg.d != 1:
        raise ValueError("the sXES comparison is defined for single-block circuits")
    _check_budget(cfg)
    noisy_scoring_distribution(np.ones((1, 1)), normalization)
    if data is None:
        data = run_ensemble(cfg, gammas=list(gammas), layer_set=layer_set)
    rows = _sweep_rows(data, gammas, cfg.n, cfg.batches, normalization)
    noisy_means = [r.noisy for r in rows]
    order = np.argsort(gammas)
    monotone = all(noisy_means[order[i]] >= noisy_means[order[i + 1]] for i in range(len(order) - 1))
    g_star = crossover(rows)
    return {
        "rows": [asdict(r) for r in rows],
        "crossover": g_star,
        "noisy_monotone_decreasing": monotone,
        "config": cfg.to_dict(),
        "noise_layer_set": layer_set,
        "p_exp_normalization": normalization,
        "cross_term_lb": _ff(analytic_cross_term_lb(cfg.n, cfg.d_U)) if cfg.n >= 2 else None,
    }

