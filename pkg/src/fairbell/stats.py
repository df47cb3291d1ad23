"""Estimators over coincidence counts: correlation, rates, CHSH, harmonics.

The harmonic analysis quantifies how much a detected-rate curve R_d(theta)
oscillates: Fourier projections at the only frequencies a quadratic
polarization response can produce (cos/sin of 2*theta and 4*theta) plus a
chi-square flatness statistic against the per-point binomial errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Mapping

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .angles import PI, canon_angle
from .engine import NS_CHSH, CoincidenceCounts, ExperimentConfig, run_batch, substream_seed
from .errors import NoDataError, ProtocolError

if TYPE_CHECKING:
    from .protocol import SweepResult

HARMONICS = (2, 4)

# Standard CHSH angle quadruple (a, a', b, b')
CHSH_A = 0.0
CHSH_A_PRIME = PI / 4
CHSH_B = PI / 8
CHSH_B_PRIME = 3 * PI / 8


@dataclass(frozen=True)
class CorrelationEstimate:
    """Two-channel correlation over the four coincidence rates."""

    value: float
    std_error: float
    n_detected: int


def correlation(counts: CoincidenceCounts) -> CorrelationEstimate:
    """E = (n_pp + n_mm - n_pm - n_mp) / detected, with binomial-style error."""
    n = counts.detected()
    if n == 0:
        raise NoDataError("correlation undefined: no detected coincidences")
    value = (counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp) / n
    std_error = math.sqrt(max(0.0, 1.0 - value * value) / n)
    return CorrelationEstimate(value=value, std_error=std_error, n_detected=n)


def detected_rate(counts: CoincidenceCounts) -> float:
    """Fraction of emitted pairs that produced a coincidence."""
    if counts.n_emitted == 0:
        raise NoDataError("detected_rate undefined: no emitted pairs")
    return counts.detected() / counts.n_emitted


def conditional_detected_rate(counts: CoincidenceCounts) -> float:
    """Coincidence fraction among pairs surviving the source polarizers."""
    n = counts.n_emitted - counts.n_source_rejected
    if n == 0:
        raise NoDataError("conditional_detected_rate undefined: no transmitted pairs")
    return counts.detected() / n


def binomial_stderr(k: int, n: int) -> float:
    """Standard error of the proportion k/n under binomial sampling."""
    if n <= 0:
        raise NoDataError("binomial_stderr undefined for n <= 0")
    p = k / n
    return math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class ChshResult:
    """CHSH combination S = |E(a,b) - E(a,b')| + |E(a',b) + E(a',b')|."""

    s_value: float
    std_error: float
    angles: tuple[tuple[float, float], ...]
    per_setting: tuple[CorrelationEstimate, ...]


def chsh(
    base_config: ExperimentConfig,
    a: float = CHSH_A,
    a_prime: float = CHSH_A_PRIME,
    b: float = CHSH_B,
    b_prime: float = CHSH_B_PRIME,
) -> ChshResult:
    """Run the four CHSH setting pairs and combine their correlations.

    Each setting pair runs a full batch of ``base_config.n_pairs`` trials on
    its own child seed (namespace NS_CHSH, setting index 0..3), so the four
    estimates are statistically independent. The quoted error is the
    quadrature sum of the per-setting errors.
    """
    settings = ((a, b), (a, b_prime), (a_prime, b), (a_prime, b_prime))
    estimates = []
    for t, (phi1, phi2) in enumerate(settings):
        cfg = replace(
            base_config,
            phi1=phi1,
            phi2=phi2,
            seed=substream_seed(base_config.seed, NS_CHSH, t),
        )
        estimates.append(correlation(run_batch(cfg)))
    e_ab, e_abp, e_apb, e_apbp = (est.value for est in estimates)
    s = abs(e_ab - e_abp) + abs(e_apb + e_apbp)
    std = math.sqrt(sum(est.std_error**2 for est in estimates))
    angles = tuple((canon_angle(p1), canon_angle(p2)) for p1, p2 in settings)
    return ChshResult(s_value=s, std_error=std, angles=angles, per_setting=tuple(estimates))


@dataclass(frozen=True)
class HarmonicComponent:
    amplitude: float
    phase: float
    std_error: float


@dataclass(frozen=True)
class HarmonicSpectrum:
    """Oscillation content of a detected-rate sweep.

    ``amplitudes[k]`` holds the least-squares amplitude and phase of the
    cos(k*(theta - phase)) component; ``chi2_flat``/``p_flat`` test the
    no-oscillation hypothesis against the per-point binomial errors.
    """

    mean_level: float
    amplitudes: Mapping[int, HarmonicComponent]
    chi2_flat: float
    dof: int
    p_flat: float


def _sweep_arrays(sweep: "SweepResult") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    thetas = np.array([p.theta for p in sweep.per_point], dtype=float)
    r = np.array([p.r_d for p in sweep.per_point], dtype=float)
    sigma = np.array([p.std_error for p in sweep.per_point], dtype=float)
    return thetas, r, sigma


def _validate_grid(thetas: np.ndarray) -> None:
    n = thetas.size
    if n < 8:
        raise ProtocolError(f"sweep grid needs at least 8 points, got {n}")
    diffs = np.diff(thetas)
    if np.any(diffs <= 0):
        raise ProtocolError("sweep grid must be strictly increasing")
    h = PI / n
    if np.any(np.abs(diffs - h) > 1e-9) or thetas[0] < 0 or thetas[-1] >= PI:
        raise ProtocolError(
            "sweep grid must be equally spaced with step pi/n covering [0, pi) once"
        )


def harmonic_analysis(sweep: "SweepResult") -> HarmonicSpectrum:
    """Project R_d(theta) onto the k = 2, 4 harmonics and test flatness.

    On an equally spaced grid of N >= 8 points over one period the sampled
    sinusoids are exactly orthogonal, so a pure cos(k*theta) input is
    recovered without leakage. The amplitude error is the RMS radius of the
    projection error disc, sqrt(var a + var b) = (2/N)*sqrt(sum sigma_j^2),
    which is the same for every harmonic.
    """
    thetas, r, sigma = _sweep_arrays(sweep)
    _validate_grid(thetas)
    n = thetas.size
    mean_level = float(r.mean())

    amp_std = 2.0 / n * math.sqrt(float(np.sum(sigma**2)))
    comps: dict[int, HarmonicComponent] = {}
    for k in HARMONICS:
        a_k = 2.0 * float(np.mean(r * np.cos(k * thetas)))
        b_k = 2.0 * float(np.mean(r * np.sin(k * thetas)))
        amplitude = math.hypot(a_k, b_k)
        phase = math.atan2(b_k, a_k) / k % (2.0 * PI / k)
        comps[k] = HarmonicComponent(amplitude=amplitude, phase=phase, std_error=amp_std)

    dev = r - mean_level
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(sigma > 0, (dev / np.where(sigma > 0, sigma, 1.0)) ** 2, np.where(dev == 0, 0.0, np.inf))
    chi2_flat = float(np.sum(terms))
    dof = n - 1
    p_flat = float(_chi2_dist.sf(chi2_flat, dof)) if math.isfinite(chi2_flat) else 0.0
    return HarmonicSpectrum(
        mean_level=mean_level, amplitudes=comps, chi2_flat=chi2_flat, dof=dof, p_flat=p_flat
    )
