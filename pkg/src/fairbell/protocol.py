"""The fair-sampling test: theta-controlled sweeps and their verdicts.

Both analyzers sit at the same angle phi while the source's preferred
polarization axis theta steps across one full period [0, pi). A fair
detector (detection probability independent of all angles) leaves the
detected-pair rate flat in theta; a setting-dependent detector imprints
oscillations. ``classify`` turns the harmonic spectrum of a sweep into a
verdict, and ``singlet_control`` shows why the theta-controlled source is
needed at all: with an uncontrolled singlet source even grossly unfair
detectors can hold R_d constant.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .angles import PI, canon_angle
from .engine import (
    NS_CONTROL,
    NS_SWEEP,
    CoincidenceCounts,
    ExperimentConfig,
    UINT64_MAX,
    substream_seed,
)
from .engine import run_batch
from .errors import ProtocolError
from .models import DetectionModel, PairCorrelation, SourceKind, SourceModel
from .stats import HarmonicSpectrum, binomial_stderr, detected_rate, harmonic_analysis


def uniform_theta_grid(n_points: int = 16) -> tuple[float, ...]:
    """n equally spaced source angles j*pi/n covering [0, pi) once."""
    if n_points < 8:
        raise ProtocolError(f"theta grid needs at least 8 points, got {n_points}")
    return tuple(j * PI / n_points for j in range(n_points))


@dataclass(frozen=True)
class SweepPlan:
    """A full theta sweep at fixed analyzer angle phi.

    ``source_mode`` picks how theta is imposed: ``IDEAL_PREPARED`` emits both
    photons exactly along theta (the analytically clean limit), while
    ``POLARIZER_FILTERED`` draws singlet pairs and filters them through real
    Malus polarizers at theta (the physical scheme; most pairs are absorbed).
    """

    phi: float
    detection: DetectionModel
    theta_grid: tuple[float, ...] = field(default_factory=uniform_theta_grid)
    n_per_point: int = 1_000_000
    seed: int = 0
    source_mode: SourceKind = SourceKind.IDEAL_PREPARED
    pair_correlation: PairCorrelation = PairCorrelation.PERPENDICULAR
    shards: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", canon_angle(self.phi))
        object.__setattr__(self, "theta_grid", tuple(float(t) for t in self.theta_grid))
        if self.source_mode not in (SourceKind.IDEAL_PREPARED, SourceKind.POLARIZER_FILTERED):
            raise ProtocolError(f"sweep source_mode must be a theta-controlled kind, got {self.source_mode!r}")
        if not isinstance(self.n_per_point, int) or self.n_per_point < 1:
            raise ProtocolError(f"n_per_point must be a positive integer, got {self.n_per_point!r}")
        if not isinstance(self.seed, int) or not (0 <= self.seed <= UINT64_MAX):
            raise ProtocolError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        _validate_plan_grid(self.theta_grid)

    def source_for(self, theta: float) -> SourceModel:
        if self.source_mode is SourceKind.IDEAL_PREPARED:
            return SourceModel.ideal_prepared(theta)
        return SourceModel.polarizer_filtered(theta, self.pair_correlation)


def _validate_plan_grid(grid: tuple[float, ...]) -> None:
    n = len(grid)
    if n < 8:
        raise ProtocolError(f"theta grid needs at least 8 points, got {n}")
    h = PI / n
    for j in range(n):
        if not (0.0 <= grid[j] < PI):
            raise ProtocolError("theta grid points must lie in [0, pi)")
        if j and abs((grid[j] - grid[j - 1]) - h) > 1e-9:
            raise ProtocolError("theta grid must be equally spaced with step pi/n (no duplicate endpoints)")


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    counts: CoincidenceCounts
    r_d: float
    std_error: float


@dataclass(frozen=True)
class SweepResult:
    """Per-point counts and detected rates of one sweep, in grid order.

    ``plan`` is None for sweeps reloaded from stored tables.
    """

    plan: SweepPlan | None
    per_point: tuple[SweepPoint, ...]

    def thetas(self) -> tuple[float, ...]:
        return tuple(p.theta for p in self.per_point)

    def rates(self) -> tuple[float, ...]:
        return tuple(p.r_d for p in self.per_point)


def run_sweep(plan: SweepPlan) -> SweepResult:
    """Execute the sweep; a pure function of the plan.

    Point i runs on child seed (plan.seed, NS_SWEEP, i), so the points are
    independent and the whole result is reproducible from the plan alone.
    """
    points = []
    for i, theta in enumerate(plan.theta_grid):
        cfg = ExperimentConfig(
            source=plan.source_for(theta),
            detection=plan.detection,
            phi1=plan.phi,
            phi2=plan.phi,
            n_pairs=plan.n_per_point,
            seed=substream_seed(plan.seed, NS_SWEEP, i),
            shards=plan.shards,
        )
        counts = run_batch(cfg)
        r_d = detected_rate(counts)
        points.append(
            SweepPoint(
                theta=theta,
                counts=counts,
                r_d=r_d,
                std_error=binomial_stderr(counts.detected(), counts.n_emitted),
            )
        )
    return SweepResult(plan=plan, per_point=tuple(points))


class Classification(enum.Enum):
    CONSISTENT_WITH_FAIR = "consistent_with_fair"
    UNFAIR_SAMPLING_DETECTED = "unfair_sampling_detected"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class VerdictThresholds:
    """Detection and compatibility levels for the sweep verdict."""

    detect_amplitude_sigma: float = 5.0
    detect_p_flat: float = 1e-3
    fair_amplitude_sigma: float = 3.0
    fair_p_flat: float = 0.01

    def __post_init__(self) -> None:
        if self.detect_amplitude_sigma <= 0 or self.fair_amplitude_sigma <= 0:
            raise ProtocolError("verdict sigma thresholds must be positive")
        if not (0.0 < self.detect_p_flat < 1.0) or not (0.0 < self.fair_p_flat < 1.0):
            raise ProtocolError("verdict p_flat thresholds must lie in (0, 1)")


DEFAULT_THRESHOLDS = VerdictThresholds()


@dataclass(frozen=True)
class FairnessVerdict:
    """Harmonic spectrum plus the fair/unfair call it supports."""

    spectrum: HarmonicSpectrum
    significance_sigma: float
    classification: Classification


def classify(sweep: SweepResult, thresholds: VerdictThresholds = DEFAULT_THRESHOLDS) -> FairnessVerdict:
    """Turn a sweep into a verdict.

    Unfair sampling is declared only on a strong double signal: the largest
    harmonic amplitude above ``detect_amplitude_sigma`` times its error AND a
    flatness p-value below ``detect_p_flat``. Fairness requires every
    amplitude within ``fair_amplitude_sigma`` errors and an unalarming
    p-value. Everything in between is inconclusive.
    """
    spectrum = harmonic_analysis(sweep)
    comps = spectrum.amplitudes.values()

    def sig(c) -> float:
        if c.std_error > 0:
            return c.amplitude / c.std_error
        return math.inf if c.amplitude > 0 else 0.0

    significance = max(sig(c) for c in comps)
    top = max(comps, key=lambda c: c.amplitude)
    detected = top.amplitude > thresholds.detect_amplitude_sigma * top.std_error and (
        spectrum.p_flat < thresholds.detect_p_flat
    )
    # <= keeps the zero-noise flat sweep (amplitude 0, error 0) classifiable
    fair = all(c.amplitude <= thresholds.fair_amplitude_sigma * c.std_error for c in comps) and (
        spectrum.p_flat > thresholds.fair_p_flat
    )
    if detected:
        classification = Classification.UNFAIR_SAMPLING_DETECTED
    elif fair:
        classification = Classification.CONSISTENT_WITH_FAIR
    else:
        classification = Classification.INCONCLUSIVE
    return FairnessVerdict(
        spectrum=spectrum, significance_sigma=significance, classification=classification
    )


@dataclass(frozen=True)
class ControlPoint:
    phi1: float
    phi2: float
    counts: CoincidenceCounts
    r_d: float
    std_error: float


@dataclass(frozen=True)
class SingletControlReport:
    """R_d spread across analyzer settings for an uncontrolled singlet source.

    A flat report here is NOT evidence of fair sampling; that is the point of
    the theta-controlled sweep. ``max_deviation_sigma`` is the largest
    per-point deviation from the weighted mean in units of its own error.
    """

    points: tuple[ControlPoint, ...]
    mean_r_d: float
    spread: float
    max_deviation_sigma: float


def singlet_control(
    config: ExperimentConfig, phi_grid: tuple[tuple[float, float], ...]
) -> SingletControlReport:
    """Measure R_d across analyzer-setting pairs with the singlet source."""
    if config.source.kind is not SourceKind.SINGLET:
        raise ProtocolError("singlet_control requires a singlet source")
    if len(phi_grid) < 2:
        raise ProtocolError("singlet_control needs at least two setting pairs")
    points = []
    for k, (phi1, phi2) in enumerate(phi_grid):
        cfg = ExperimentConfig(
            source=config.source,
            detection=config.detection,
            phi1=phi1,
            phi2=phi2,
            n_pairs=config.n_pairs,
            seed=substream_seed(config.seed, NS_CONTROL, k),
            shards=config.shards,
        )
        counts = run_batch(cfg)
        points.append(
            ControlPoint(
                phi1=cfg.phi1,
                phi2=cfg.phi2,
                counts=counts,
                r_d=detected_rate(counts),
                std_error=binomial_stderr(counts.detected(), counts.n_emitted),
            )
        )
    rates = [p.r_d for p in points]
    mean = sum(rates) / len(rates)
    spread = max(rates) - min(rates)
    max_dev = max(
        (abs(p.r_d - mean) / p.std_error if p.std_error > 0 else (0.0 if p.r_d == mean else math.inf))
        for p in points
    )
    return SingletControlReport(
        points=tuple(points), mean_r_d=mean, spread=spread, max_deviation_sigma=max_dev
    )


def default_control_grid(step_deg: float = 22.5) -> tuple[tuple[float, float], ...]:
    """Common-rotation setting pairs (delta, delta + step) sweeping one period."""
    n = max(2, int(round(180.0 / step_deg)))
    step = math.radians(step_deg)
    return tuple((canon_angle(j * step), canon_angle(j * step + step)) for j in range(n))
