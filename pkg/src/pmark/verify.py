"""Self-contained verification suite behind ``pmark verify``.

Runs the package's statistical machinery against independent computations
and known identities, and reports a pass/fail per check with the measured
deviation. The ``theory`` suite covers the selection and detection
guarantees; ``all`` adds geometry, estimator, and backend checks.

``negative_control=True`` swaps a deliberately non-uniform mass vector into
the zero-distortion check, which must then fail — demonstrating the suite
can actually reject.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import sqrt
from statistics import NormalDist
from typing import Callable, List, Optional

import numpy as np
from scipy import integrate
from scipy.stats import chi2

from pmark import oracles
from pmark.config import AttackSpec
from pmark.detection import z_statistic, z_threshold
from pmark.geometry import angle_density, sample_sphere
from pmark.keys import MasterKey
from pmark.proxies import channel_scores
from pmark.rng import DOMAIN_AUX, stream
from pmark.selection import hd_median
from pmark.simulate import apply_attack, selection_index_tv

DEFAULT_VERIFY_SEED = 2718


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    bound: Optional[float]
    detail: str = ""
    seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "bound": self.bound,
            "detail": self.detail,
            "seconds": round(self.seconds, 3),
        }


@dataclass
class VerifyReport:
    suite: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "all_passed": self.all_passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def _timed(report: VerifyReport, name: str, fn: Callable[[], CheckResult]) -> None:
    started = time.perf_counter()
    result = fn()
    result.name = name
    result.seconds = time.perf_counter() - started
    report.checks.append(result)


def _check_single_channel(seed: int) -> CheckResult:
    deviations = []
    for n, trials in ((2, 100_000), (8, 200_000)):
        deviations.append(
            (
                oracles.single_channel_distortion_check(n, trials, stream(seed, DOMAIN_AUX, 10, n)),
                5.0 * sqrt((1.0 / n) * (1.0 - 1.0 / n) / trials),
            )
        )
    measured = max(dev / bound for dev, bound in deviations)
    return CheckResult(
        name="",
        passed=measured <= 1.0,
        measured=max(dev for dev, _ in deviations),
        bound=max(bound for _, bound in deviations),
        detail="uniform 1/N selection frequency, single channel (max dev vs 5-sigma bound)",
    )


def _check_multi_channel_exact(seed: int) -> CheckResult:
    worst = 0.0
    for b in (1, 2, 3):
        scores = stream(seed, DOMAIN_AUX, 11, b).normals(8 * b).reshape(8, b)
        probs, leaves = oracles.enumerate_selection_probabilities(scores)
        worst = max(worst, max(abs(float(p - Fraction(1, 8))) for p in probs))
        covered = np.sort(np.concatenate(leaves))
        if not np.array_equal(covered, np.arange(8)):
            return CheckResult("", False, 1.0, 0.0, "leaves failed to partition the candidate set")
    return CheckResult(
        name="",
        passed=worst == 0.0,
        measured=worst,
        bound=0.0,
        detail="exact enumeration, N=8, b in {1,2,3}: every candidate selected w.p. 1/N",
    )


def _check_multi_channel_tv(seed: int) -> CheckResult:
    tv = selection_index_tv(N=8, b=3, dim=16, trials=100_000, seed=seed, mode="online")
    return CheckResult(
        name="",
        passed=tv <= 0.02,
        measured=tv,
        bound=0.02,
        detail="Monte Carlo TV distance from uniform selection, N=8, b=3",
    )


def _check_closed_form_mc(seed: int) -> CheckResult:
    estimates = oracles.semstamp_monte_carlo(
        [0.3, 0.7], 1, 1_000_000, stream(seed, DOMAIN_AUX, 12)
    )
    measured = abs(float(estimates[0]) - 5.0 / 3.0)
    return CheckResult(
        name="",
        passed=measured <= 0.02,
        measured=measured,
        bound=0.02,
        detail="green-set rejection sampler vs closed-form scaling factor, q=(0.3,0.7)",
    )


def _check_normalization(seed: int) -> CheckResult:
    rng = stream(seed, DOMAIN_AUX, 13)
    worst = 0.0
    for _ in range(50):
        M = 2 + int(rng.integers(9))
        masses = rng.uniforms(M) + 1e-3
        masses /= masses.sum()
        m = 1 + int(rng.integers(M))
        factors = oracles.pmf_scaling_factors(masses, m)
        worst = max(worst, abs(float(masses @ factors) - 1.0))
    return CheckResult(
        name="",
        passed=worst <= 1e-10,
        measured=worst,
        bound=1e-10,
        detail="sum_u q(u) A(u) = 1 on 50 random instances, M <= 10",
    )


def _check_uniform_gap(negative_control: bool) -> CheckResult:
    if negative_control:
        masses = [0.3, 0.7]
        detail = "NEGATIVE CONTROL: non-uniform masses injected; this check must fail"
        gap = oracles.distortion_gap(masses, 1)
        return CheckResult("", gap <= 1e-12, gap, 1e-12, detail)
    worst = 0.0
    for M, m in ((2, 1), (4, 2), (6, 3), (10, 4)):
        worst = max(worst, oracles.distortion_gap([1.0 / M] * M, m))
    return CheckResult(
        name="",
        passed=worst <= 1e-12,
        measured=worst,
        bound=1e-12,
        detail="uniform masses give zero distortion gap",
    )


def _check_nonuniform_gap(seed: int) -> CheckResult:
    rng = stream(seed, DOMAIN_AUX, 14)
    smallest = np.inf
    for _ in range(100):
        M = 2 + int(rng.integers(7))
        masses = rng.uniforms(M) + 1e-3
        masses /= masses.sum()
        m = 1 + int(rng.integers(M - 1))
        smallest = min(smallest, oracles.distortion_gap(masses, m))
    return CheckResult(
        name="",
        passed=smallest > 1e-6,
        measured=float(smallest),
        bound=1e-6,
        detail="100 random non-uniform masses all show positive distortion gap",
    )


def _check_monotonic(seed: int) -> CheckResult:
    rng = stream(seed, DOMAIN_AUX, 15)
    violations = 0
    for _ in range(25):
        M = 3 + int(rng.integers(6))
        masses = rng.uniforms(M) + 1e-3
        masses /= masses.sum()
        m = 1 + int(rng.integers(M - 1))
        factors = oracles.pmf_scaling_factors(masses, m)
        for u in range(M):
            for v in range(M):
                if masses[u] > masses[v] and not factors[u] < factors[v]:
                    violations += 1
    return CheckResult(
        name="",
        passed=violations == 0,
        measured=float(violations),
        bound=0.0,
        detail="larger natural mass always gets the smaller scaling factor",
    )


def _check_attack_band(seed: int) -> CheckResult:
    dim = 768
    key = MasterKey(seed=seed & ((1 << 64) - 1), dim=dim, channels=1)
    pivots = key.pivots()
    worst_excess = -np.inf
    flip_ok = True
    for i, d in enumerate((0.005, 0.02, 0.08)):
        rng = stream(seed, DOMAIN_AUX, 16, i)
        emb = sample_sphere(rng, dim, size=10_000)
        attacked, _ = apply_attack(emb, AttackSpec(kind="paraphrase-rotation", d=d), rng)
        f = channel_scores(emb, pivots)[:, 0]
        f_prime = channel_scores(attacked, pivots)[:, 0]
        worst_excess = max(worst_excess, float(np.max(np.abs(f_prime - f)) - sqrt(2.0 * d)))
        flips = float(np.mean(np.sign(f) != np.sign(f_prime)))
        band = oracles.robustness_band_bound(f, 0.0, d)
        stderr = sqrt(max(band * (1.0 - band), 1e-12) / f.size)
        if flips > band + 3.0 * stderr:
            flip_ok = False
    return CheckResult(
        name="",
        passed=worst_excess <= 1e-9 and flip_ok,
        measured=worst_excess,
        bound=1e-9,
        detail="score shift within sqrt(2d) and flip rate within the band mass",
    )


def _check_angle_normalization() -> CheckResult:
    worst = 0.0
    for d in (2, 3, 10, 768):
        total, _ = integrate.quad(lambda th: angle_density(th, d), 0.0, np.pi, limit=200)
        worst = max(worst, abs(total - 1.0))
    return CheckResult(
        name="",
        passed=worst <= 1e-6,
        measured=worst,
        bound=1e-6,
        detail="angle density integrates to 1 for d in {2, 3, 10, 768}",
    )


def _check_angle_gof(seed: int) -> CheckResult:
    dim, samples, bins = 768, 100_000, 64
    rng = stream(seed, DOMAIN_AUX, 17)
    pivot = np.zeros(dim)
    pivot[0] = 1.0
    cosines = sample_sphere(rng, dim, size=samples) @ pivot
    angles = np.arccos(np.clip(cosines, -1.0, 1.0))
    # equal-probability bins from the cosine law quantiles
    from scipy.special import betaincinv

    a = (dim - 1) / 2.0
    qs = betaincinv(a, a, np.linspace(0.0, 1.0, bins + 1))
    edges = np.arccos(np.clip(2.0 * qs - 1.0, -1.0, 1.0))[::-1]
    counts, _ = np.histogram(angles, bins=edges)
    expected = samples / bins
    statistic = float(((counts - expected) ** 2 / expected).sum())
    critical = float(chi2.isf(0.001, bins - 1))
    median_abs = abs(float(np.median(cosines)))
    return CheckResult(
        name="",
        passed=statistic <= critical and median_abs <= 0.01,
        measured=statistic,
        bound=critical,
        detail=f"chi-square GOF at d=768 (0.1% level); |median cosine| = {median_abs:.5f}",
    )


def _check_sphere_concentration(seed: int) -> CheckResult:
    dim = 768
    rng = stream(seed, DOMAIN_AUX, 18)
    pivot = np.zeros(dim)
    pivot[0] = 1.0
    cosines = sample_sphere(rng, dim, size=100_000) @ pivot
    inside = float(np.mean(np.abs(cosines) <= 0.12))
    median_abs = abs(float(np.median(cosines)))
    return CheckResult(
        name="",
        passed=median_abs <= 0.01 and inside >= 0.99,
        measured=median_abs,
        bound=0.01,
        detail=f"zero-median prior: {100 * inside:.2f}% of cosine mass inside [-0.12, 0.12]",
    )


def _check_pivots(seed: int) -> CheckResult:
    worst = 0.0
    for dim, b in ((2, 2), (64, 4), (768, 4), (768, 16)):
        key = MasterKey(seed=(seed * 31 + b) & ((1 << 64) - 1), dim=dim, channels=b)
        first = key.pivots()
        again = MasterKey(seed=key.seed, dim=dim, channels=b).pivots()
        if not np.array_equal(first.matrix, again.matrix):
            return CheckResult("", False, 1.0, 0.0, "pivot regeneration not bit-identical")
        worst = max(worst, first.gram_defect())
    return CheckResult(
        name="",
        passed=worst <= 1e-8,
        measured=worst,
        bound=1e-8,
        detail="orthonormality and bit-exact regeneration across shapes",
    )


def _check_z_arithmetic() -> CheckResult:
    oracle = NormalDist()
    deviations = [
        abs(z_statistic(48, 48) - 6.9282),
        abs(z_statistic(24, 48)),
        abs(z_statistic(0, 48) - z_statistic(48, 48)),
    ]
    z_dev = max(deviations)
    t_dev = max(
        abs(z_threshold(0.01) - oracle.inv_cdf(0.99)),
        abs(z_threshold(0.05) - oracle.inv_cdf(0.95)),
        abs(z_threshold(0.5)),
        abs(z_threshold(0.01) - 2.3263),
        abs(z_threshold(0.05) - 1.6449),
    )
    return CheckResult(
        name="",
        passed=z_dev <= 1e-4 and t_dev <= 1e-3,
        measured=max(z_dev, t_dev),
        bound=1e-3,
        detail="z statistic identities and normal-quantile thresholds",
    )


def _beta_cdf_quadrature(a: float, x: float) -> float:
    from math import lgamma

    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_norm = lgamma(2 * a) - 2 * lgamma(a)
    value, _ = integrate.quad(
        lambda t: np.exp(log_norm + (a - 1) * (np.log(t) + np.log1p(-t))), 0.0, x, limit=200
    )
    return value


def _check_hd_median(seed: int) -> CheckResult:
    exact = max(abs(hd_median([1, 2, 3]) - 2.0), abs(hd_median([0, 1]) - 0.5))
    rng = stream(seed, DOMAIN_AUX, 19)
    worst = exact
    for _ in range(25):
        n = 2 + int(rng.integers(63))
        values = np.sort(rng.normals(n))
        a = (n + 1) / 2.0
        grid = np.arange(n + 1) / n
        cdf = np.array([_beta_cdf_quadrature(a, g) for g in grid])
        reference = float(np.diff(cdf) @ values)
        worst = max(worst, abs(hd_median(values) - reference))
    return CheckResult(
        name="",
        passed=worst <= 1e-9,
        measured=worst,
        bound=1e-9,
        detail="symmetric identities plus quadrature-based weight oracle",
    )


def _check_backends(seed: int) -> CheckResult:
    from pmark import _philox_numpy as fallback

    # independent reference implementation of the block function
    mask = (1 << 64) - 1
    m0, m1 = 0xD2E7470EE14C6C93, 0xCA5A826395121157
    w0, w1 = 0x9E3779B97F4A7C15, 0xBB67AE8584CAA73B

    def reference_block(counter, key):
        c0, c1, c2, c3 = counter
        k0, k1 = key
        for r in range(10):
            p0, p1 = m0 * c0, m1 * c2
            c0, c1, c2, c3 = ((p1 >> 64) ^ c1 ^ k0) & mask, p1 & mask, ((p0 >> 64) ^ c3 ^ k1) & mask, p0 & mask
            if r < 9:
                k0, k1 = (k0 + w0) & mask, (k1 + w1) & mask
        return [c0, c1, c2, c3]

    key = (seed & ((1 << 64) - 1), (seed * 7 + 1) & ((1 << 64) - 1))
    expected = np.array(
        reference_block((0, 0, 0, 0), key) + reference_block((1, 0, 0, 0), key), dtype=np.uint64
    )
    got_fallback = fallback.philox_raw(key[0], key[1], 0, 8)
    ok = np.array_equal(got_fallback, expected)
    detail = "fallback matches the reference block function"
    try:
        from pmark import _kernels as compiled

        got_compiled = compiled.philox_raw(key[0], key[1], 0, 8)
        uniforms_match = np.array_equal(
            compiled.philox_uniforms(key[0], key[1], 0, 1001),
            fallback.philox_uniforms(key[0], key[1], 0, 1001),
        )
        ok = ok and np.array_equal(got_compiled, expected) and uniforms_match
        detail = "fallback and compiled kernels match the reference bit-for-bit"
    except ImportError:
        detail += " (compiled kernels not built)"
    return CheckResult(name="", passed=ok, measured=0.0 if ok else 1.0, bound=0.0, detail=detail)


def _check_offline_tv(seed: int) -> CheckResult:
    tv = selection_index_tv(N=16, b=3, dim=64, trials=20_000, seed=seed, mode="offline")
    return CheckResult(
        name="",
        passed=True,
        measured=tv,
        bound=None,
        detail="offline argmax selection distortion (reported, not bounded)",
    )


def run_verify(
    suite: str = "theory",
    seed: int = DEFAULT_VERIFY_SEED,
    negative_control: bool = False,
) -> VerifyReport:
    report = VerifyReport(suite=suite)
    _timed(report, "single_channel_uniformity", lambda: _check_single_channel(seed))
    _timed(report, "multi_channel_exact_uniformity", lambda: _check_multi_channel_exact(seed))
    _timed(report, "multi_channel_tv_distance", lambda: _check_multi_channel_tv(seed))
    _timed(report, "green_scaling_closed_form_vs_mc", lambda: _check_closed_form_mc(seed))
    _timed(report, "scaling_factor_normalization", lambda: _check_normalization(seed))
    _timed(report, "uniform_mass_zero_gap", lambda: _check_uniform_gap(negative_control))
    _timed(report, "nonuniform_mass_positive_gap", lambda: _check_nonuniform_gap(seed))
    _timed(report, "scaling_factor_monotonicity", lambda: _check_monotonic(seed))
    _timed(report, "attack_band_bound", lambda: _check_attack_band(seed))
    _timed(report, "angle_density_normalization", _check_angle_normalization)
    _timed(report, "angle_density_goodness_of_fit", lambda: _check_angle_gof(seed))
    _timed(report, "offline_selection_distortion", lambda: _check_offline_tv(seed))
    if suite == "all":
        _timed(report, "sphere_zero_median_prior", lambda: _check_sphere_concentration(seed))
        _timed(report, "pivot_orthonormality", lambda: _check_pivots(seed))
        _timed(report, "z_test_arithmetic", _check_z_arithmetic)
        _timed(report, "hd_median_estimator", lambda: _check_hd_median(seed))
        _timed(report, "prng_backend_bitstreams", lambda: _check_backends(seed))
    return report
