"""Hidden-variable photon-pair sources and per-photon detection models.

A pair is two photons carrying hidden polarization axes ``lambda_left`` and
``lambda_right`` plus one auxiliary uniform variate per photon. The aux
variate is the only randomness a detection gate consumes, which makes "was
this photon seen" a function of the photon's own hidden state and its own
analyzer angle. Models that additionally need randomness for the +/- channel
split (the Malus split of the constant-efficiency model, the outcome flip of
the independent-errors model) draw it from the caller's stream, exactly one
draw per photon regardless of the result, so stream offsets never depend on
measurement settings and one side's draws cannot be displaced by the other
side's analyzer.

Outcome channels follow the usual two-channel labeling: +1 for the ordinary
beam, -1 for the extraordinary beam, 0 for an undetected photon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .angles import PI, canon_angle


class Outcome(enum.IntEnum):
    """Single-photon measurement result at a two-channel analyzer."""

    PLUS = 1
    MINUS = -1
    UNDETECTED = 0


class PairCorrelation(enum.Enum):
    """Hidden-axis relation between the two photons of a pair."""

    PERPENDICULAR = "perpendicular"
    PARALLEL = "parallel"


class SourceKind(enum.Enum):
    SINGLET = "singlet"
    IDEAL_PREPARED = "ideal_prepared"
    POLARIZER_FILTERED = "polarizer_filtered"


class DetectionKind(enum.Enum):
    FAIR_CONSTANT = "fair"
    UNFAIR_THRESHOLD = "unfair_threshold"
    UNFAIR_POWER = "unfair_power"
    INDEPENDENT_ERRORS = "independent_errors"


@dataclass(frozen=True)
class PairHiddenState:
    """Hidden variables carried by one emitted photon pair.

    ``lambda_*`` are polarization axes in canonical [0, pi) radians;
    ``aux_*`` are per-photon uniforms on [0, 1) that later drive the
    detection gates.
    """

    lambda_left: float
    lambda_right: float
    aux_left: float
    aux_right: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lambda_left", canon_angle(self.lambda_left))
        object.__setattr__(self, "lambda_right", canon_angle(self.lambda_right))
        for name in ("aux_left", "aux_right"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {v!r}")


@dataclass(frozen=True)
class SourceModel:
    """Photon-pair source.

    ``singlet`` draws the left axis uniformly on [0, pi); ``ideal_prepared``
    emits both photons along a fixed axis ``theta``; ``polarizer_filtered``
    draws a singlet pair and sends it through aligned polarizers at ``theta``
    (pairs losing a photon there are source-rejected).
    """

    kind: SourceKind
    theta: float = 0.0
    pair_correlation: PairCorrelation = PairCorrelation.PERPENDICULAR

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SourceKind):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not isinstance(self.pair_correlation, PairCorrelation):
            raise ValueError(f"unknown pair correlation {self.pair_correlation!r}")
        object.__setattr__(self, "theta", canon_angle(self.theta))

    @classmethod
    def singlet(cls, pair_correlation: PairCorrelation = PairCorrelation.PERPENDICULAR) -> "SourceModel":
        return cls(SourceKind.SINGLET, 0.0, pair_correlation)

    @classmethod
    def ideal_prepared(cls, theta: float) -> "SourceModel":
        return cls(SourceKind.IDEAL_PREPARED, theta)

    @classmethod
    def polarizer_filtered(
        cls, theta: float, pair_correlation: PairCorrelation = PairCorrelation.PERPENDICULAR
    ) -> "SourceModel":
        return cls(SourceKind.POLARIZER_FILTERED, theta, pair_correlation)

    def with_theta(self, theta: float) -> "SourceModel":
        return replace(self, theta=theta)


@dataclass(frozen=True)
class DetectionModel:
    """Per-photon detection rule at one analyzer.

    Writing ``c = cos 2(lambda - phi)``:

    * ``fair``: Malus +/- split (Plus with probability cos^2(lambda - phi)),
      then an angle-independent efficiency gate ``eta``.
    * ``unfair_threshold``: detected iff ``|c| > tau``; outcome is sign(c).
    * ``unfair_power``: detected with probability ``|c|**kappa``; outcome is
      sign(c).
    * ``independent_errors``: outcome sign(c) flipped with probability
      ``flip_prob``, detected with probability ``eta``; both gates are
      angle-independent, so ``independent_errors(eta, 0.0)`` is the fair
      deterministic-sign model.

    sign(0) resolves to Plus so that every model stays deterministic given
    its random inputs.
    """

    kind: DetectionKind
    eta: float = 1.0
    tau: float = 0.0
    kappa: float = 1.0
    flip_prob: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.kind, DetectionKind):
            raise ValueError(f"unknown detection kind {self.kind!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not (0.0 <= self.tau < 1.0):
            raise ValueError(f"tau must lie in [0, 1), got {self.tau!r}")
        if not self.kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if not (0.0 <= self.flip_prob <= 0.5):
            raise ValueError(f"flip_prob must lie in [0, 1/2], got {self.flip_prob!r}")

    @classmethod
    def fair_constant(cls, eta: float = 1.0) -> "DetectionModel":
        return cls(DetectionKind.FAIR_CONSTANT, eta=eta)

    @classmethod
    def unfair_threshold(cls, tau: float) -> "DetectionModel":
        return cls(DetectionKind.UNFAIR_THRESHOLD, tau=tau)

    @classmethod
    def unfair_power(cls, kappa: float) -> "DetectionModel":
        return cls(DetectionKind.UNFAIR_POWER, kappa=kappa)

    @classmethod
    def independent_errors(cls, eta: float, flip_prob: float = 0.0) -> "DetectionModel":
        return cls(DetectionKind.INDEPENDENT_ERRORS, eta=eta, flip_prob=flip_prob)

    @property
    def is_angle_independent(self) -> bool:
        """True when the detection gate cannot depend on any angle."""
        return self.kind in (DetectionKind.FAIR_CONSTANT, DetectionKind.INDEPENDENT_ERRORS)


def partner_angle(lam: float, pair_correlation: PairCorrelation) -> float:
    """Hidden axis of the partner photon."""
    if pair_correlation is PairCorrelation.PERPENDICULAR:
        return canon_angle(lam + PI / 2)
    return canon_angle(lam)


def emit_pair(source: SourceModel, rng: np.random.Generator) -> PairHiddenState | None:
    """One emission attempt; None means a source polarizer absorbed a photon.

    Draw order per attempt is fixed (axis, aux_left, aux_right, then the two
    polarizer-pass uniforms for filtered sources) so stream consumption never
    depends on downstream measurement settings.
    """
    if source.kind is SourceKind.IDEAL_PREPARED:
        return PairHiddenState(source.theta, source.theta, rng.random(), rng.random())
    lam = rng.random() * PI
    pair = PairHiddenState(lam, partner_angle(lam, source.pair_correlation), rng.random(), rng.random())
    if source.kind is SourceKind.SINGLET:
        return pair
    return apply_source_polarizers(pair, source.theta, rng)


def sample_pair(source: SourceModel, rng: np.random.Generator) -> PairHiddenState:
    """Draw pairs until the source yields one (retrying past polarizer losses)."""
    while True:
        pair = emit_pair(source, rng)
        if pair is not None:
            return pair


def apply_source_polarizers(
    pair: PairHiddenState, theta: float, rng: np.random.Generator
) -> PairHiddenState | None:
    """Send both photons through aligned polarizers at ``theta``.

    Each photon passes independently with Malus probability
    cos^2(lambda - theta) and, if it passes, its hidden axis is projected to
    exactly ``theta``. Only a both-pass pair can still produce a coincidence,
    so anything else is reported as absorbed (None).
    """
    theta = canon_angle(theta)
    u_left = rng.random()
    u_right = rng.random()
    if u_left < math.cos(pair.lambda_left - theta) ** 2 and u_right < math.cos(pair.lambda_right - theta) ** 2:
        return replace(pair, lambda_left=theta, lambda_right=theta)
    return None


def measure_photon(
    lam: float,
    phi: float,
    model: DetectionModel,
    rng: np.random.Generator,
    aux: float | None = None,
) -> Outcome:
    """Measure one photon with hidden axis ``lam`` at analyzer angle ``phi``.

    ``aux`` is the photon's detection-gate uniform; when omitted a fresh one
    is drawn from ``rng``. The result depends only on (lam, aux, phi, model)
    plus at most one further draw from ``rng``, never on the other photon.
    """
    if aux is None:
        aux = rng.random()
    delta = lam - phi
    c = math.cos(2.0 * delta)
    kind = model.kind
    if kind is DetectionKind.FAIR_CONSTANT:
        # split uniform drawn even for undetected photons: fixed stream offset
        channel = Outcome.PLUS if rng.random() < math.cos(delta) ** 2 else Outcome.MINUS
        return channel if aux < model.eta else Outcome.UNDETECTED
    if kind is DetectionKind.UNFAIR_THRESHOLD:
        if abs(c) > model.tau:
            return Outcome.PLUS if c >= 0.0 else Outcome.MINUS
        return Outcome.UNDETECTED
    if kind is DetectionKind.UNFAIR_POWER:
        if aux < abs(c) ** model.kappa:
            return Outcome.PLUS if c >= 0.0 else Outcome.MINUS
        return Outcome.UNDETECTED
    # independent errors
    flip = rng.random() < model.flip_prob
    sign = Outcome.PLUS if (c >= 0.0) != flip else Outcome.MINUS
    return sign if aux < model.eta else Outcome.UNDETECTED
