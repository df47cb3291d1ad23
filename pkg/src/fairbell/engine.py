"""Trial execution, coincidence classification, and count accumulation.

Reproducibility contract
------------------------
The trial index space [0, n_pairs) is split into fixed-size blocks of
``BLOCK_SIZE`` trials. Block ``j`` draws from its own PCG64 generator seeded
with ``SeedSequence((seed, 0, j))`` and consumes whole columns of uniforms in
a fixed order: source columns (axis, aux_left, aux_right, the polarizer-pass
pair for filtered sources), then the left measurement column, then the right.
Workers are assigned contiguous block ranges, so the merged counts are a
function of (config, seed) alone: the same for every shard count and every
thread schedule. Derived runs (CHSH settings, sweep points, control points)
use child seeds from ``substream_seed`` with per-purpose namespaces.

Counters are 64-bit with checked addition; merging raises instead of
wrapping.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .angles import PI, canon_angle, canon_angle_array
from .models import (
    DetectionKind,
    DetectionModel,
    Outcome,
    PairCorrelation,
    SourceKind,
    SourceModel,
    emit_pair,
    measure_photon,
)

UINT64_MAX = 2**64 - 1
BLOCK_SIZE = 1 << 16

# SeedSequence namespaces: (seed, namespace, index)
NS_BLOCK = 0
NS_CHSH = 1
NS_SWEEP = 2
NS_CONTROL = 3


def substream_seed(seed: int, namespace: int, index: int) -> int:
    """Derive an independent 64-bit child seed for a named subsidiary run."""
    ss = np.random.SeedSequence((seed, namespace, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _block_generator(seed: int, block_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, NS_BLOCK, block_index))))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one batch: models, settings, size, seed."""

    source: SourceModel
    detection: DetectionModel
    phi1: float
    phi2: float
    n_pairs: int
    seed: int = 0
    shards: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi1", canon_angle(self.phi1))
        object.__setattr__(self, "phi2", canon_angle(self.phi2))
        if not isinstance(self.n_pairs, int) or isinstance(self.n_pairs, bool) or self.n_pairs < 1:
            raise ValueError(f"n_pairs must be a positive integer, got {self.n_pairs!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not (0 <= self.seed <= UINT64_MAX):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.shards, int) or isinstance(self.shards, bool) or self.shards < 1:
            raise ValueError(f"shards must be a positive integer, got {self.shards!r}")


_COUNT_FIELDS = (
    "n_pp",
    "n_pm",
    "n_mp",
    "n_mm",
    "n_single_left",
    "n_single_right",
    "n_none",
    "n_source_rejected",
)


@dataclass(frozen=True)
class CoincidenceCounts:
    """Fourfold coincidence tallies plus singles, empties, and rejections.

    The accounting identity ``n_emitted == sum of the eight disjoint
    categories`` is enforced at construction, so it holds after every batch
    and every merge by integer equality.
    """

    n_pp: int = 0
    n_pm: int = 0
    n_mp: int = 0
    n_mm: int = 0
    n_single_left: int = 0
    n_single_right: int = 0
    n_none: int = 0
    n_source_rejected: int = 0
    n_emitted: int = 0

    def __post_init__(self) -> None:
        total = 0
        for name in _COUNT_FIELDS + ("n_emitted",):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")
            if v > UINT64_MAX:
                raise OverflowError(f"{name} exceeds the 64-bit counter range")
            if name != "n_emitted":
                total += v
        if total != self.n_emitted:
            raise ValueError(
                f"count accounting violated: categories sum to {total}, n_emitted is {self.n_emitted}"
            )

    @classmethod
    def zero(cls) -> "CoincidenceCounts":
        return cls()

    def detected(self) -> int:
        """Total both-detected coincidences across the four channel pairs."""
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm


def merge_counts(a: CoincidenceCounts, b: CoincidenceCounts) -> CoincidenceCounts:
    """Field-wise sum; associative, commutative, identity ``zero()``.

    Raises OverflowError if any summed counter would leave the 64-bit range.
    """
    kwargs = {
        name: getattr(a, name) + getattr(b, name) for name in _COUNT_FIELDS + ("n_emitted",)
    }
    return CoincidenceCounts(**kwargs)


SOURCE_REJECTED = None  # run_trial marker for a pair absorbed at the source


def run_trial(
    config: ExperimentConfig, rng: np.random.Generator
) -> tuple[Outcome, Outcome] | None:
    """Run one trial: emit, optionally filter, measure both sides.

    Returns the ordered (left, right) outcome pair, or None when the source
    polarizers absorbed a photon. This is the scalar reference path; batches
    use the vectorized kernel with its own documented stream layout.
    """
    pair = emit_pair(config.source, rng)
    if pair is None:
        return SOURCE_REJECTED
    left = measure_photon(pair.lambda_left, config.phi1, config.detection, rng, aux=pair.aux_left)
    right = measure_photon(pair.lambda_right, config.phi2, config.detection, rng, aux=pair.aux_right)
    return left, right


def _source_columns(source: SourceModel, m: int, g: np.random.Generator):
    """Vectorized source draw: (lam_left, lam_right, aux_left, aux_right, rejected)."""
    if source.kind is SourceKind.IDEAL_PREPARED:
        lam = np.full(m, source.theta)
        return lam, lam, g.random(m), g.random(m), np.zeros(m, dtype=bool)
    lam_left = g.random(m) * PI
    if source.pair_correlation is PairCorrelation.PERPENDICULAR:
        lam_right = canon_angle_array(lam_left + PI / 2)
    else:
        lam_right = lam_left
    aux_left = g.random(m)
    aux_right = g.random(m)
    if source.kind is SourceKind.SINGLET:
        return lam_left, lam_right, aux_left, aux_right, np.zeros(m, dtype=bool)
    # polarizer filtered: both photons must pass Malus gates at theta
    u_left = g.random(m)
    u_right = g.random(m)
    transmitted = (u_left < np.cos(lam_left - source.theta) ** 2) & (
        u_right < np.cos(lam_right - source.theta) ** 2
    )
    lam_l = np.where(transmitted, source.theta, lam_left)
    lam_r = np.where(transmitted, source.theta, lam_right)
    return lam_l, lam_r, aux_left, aux_right, ~transmitted


def _sign_plus(c: np.ndarray) -> np.ndarray:
    # sign(0) resolves to Plus
    return np.where(c >= 0.0, 1, -1).astype(np.int8)


def _measure_column(
    lam: np.ndarray, phi: float, model: DetectionModel, aux: np.ndarray, g: np.random.Generator
) -> np.ndarray:
    """Vectorized measurement of one side; one stream column at most."""
    delta = lam - phi
    c = np.cos(2.0 * delta)
    kind = model.kind
    if kind is DetectionKind.FAIR_CONSTANT:
        u = g.random(lam.size)
        channel = np.where(u < np.cos(delta) ** 2, 1, -1).astype(np.int8)
        return np.where(aux < model.eta, channel, 0).astype(np.int8)
    if kind is DetectionKind.UNFAIR_THRESHOLD:
        return np.where(np.abs(c) > model.tau, _sign_plus(c), 0).astype(np.int8)
    if kind is DetectionKind.UNFAIR_POWER:
        return np.where(aux < np.abs(c) ** model.kappa, _sign_plus(c), 0).astype(np.int8)
    u = g.random(lam.size)
    sign = _sign_plus(c)
    sign = np.where(u < model.flip_prob, -sign, sign)
    return np.where(aux < model.eta, sign, 0).astype(np.int8)


def _simulate_block(config: ExperimentConfig, block_index: int, size: int):
    """One block of trials: (lam_left, lam_right, out_left, out_right, rejected)."""
    g = _block_generator(config.seed, block_index)
    lam_l, lam_r, aux_l, aux_r, rejected = _source_columns(config.source, size, g)
    out_l = _measure_column(lam_l, config.phi1, config.detection, aux_l, g)
    out_r = _measure_column(lam_r, config.phi2, config.detection, aux_r, g)
    return lam_l, lam_r, out_l, out_r, rejected


def _tally(out_l: np.ndarray, out_r: np.ndarray, rejected: np.ndarray) -> np.ndarray:
    """3x3 outcome histogram (length 9) over non-rejected trials plus rejects.

    Returns an int64 vector: bincount of (out_l+1)*3 + (out_r+1) followed by
    the rejected count at index 9.
    """
    code = (out_l.astype(np.intp) + 1) * 3 + (out_r.astype(np.intp) + 1)
    hist = np.bincount(code[~rejected], minlength=9)
    return np.concatenate([hist, [int(rejected.sum())]])


def _counts_from_hist(hist: np.ndarray) -> CoincidenceCounts:
    h = [int(x) for x in hist]
    return CoincidenceCounts(
        n_pp=h[8],
        n_pm=h[6],
        n_mp=h[2],
        n_mm=h[0],
        n_single_left=h[1] + h[7],
        n_single_right=h[3] + h[5],
        n_none=h[4],
        n_source_rejected=h[9],
        n_emitted=sum(h),
    )


def _block_plan(n_pairs: int) -> list[tuple[int, int]]:
    plan = []
    start = 0
    j = 0
    while start < n_pairs:
        size = min(BLOCK_SIZE, n_pairs - start)
        plan.append((j, size))
        start += size
        j += 1
    return plan


def _run_block_range(config: ExperimentConfig, blocks: list[tuple[int, int]]) -> np.ndarray:
    acc = np.zeros(10, dtype=np.int64)
    for j, size in blocks:
        _, _, out_l, out_r, rejected = _simulate_block(config, j, size)
        acc += _tally(out_l, out_r, rejected)
    return acc


def run_batch(config: ExperimentConfig) -> CoincidenceCounts:
    """Run exactly ``config.n_pairs`` trials and classify every one.

    Deterministic given (config, seed); identical for every shard count and
    thread schedule (see module docstring for the stream convention).
    """
    blocks = _block_plan(config.n_pairs)
    shards = min(config.shards, len(blocks))
    if shards <= 1:
        total = _run_block_range(config, blocks)
    else:
        bounds = np.linspace(0, len(blocks), shards + 1).astype(int)
        chunks = [blocks[bounds[i] : bounds[i + 1]] for i in range(shards)]
        with ThreadPoolExecutor(max_workers=shards) as pool:
            parts = list(pool.map(lambda ch: _run_block_range(config, ch), chunks))
        total = reduce(np.add, parts)
    return _counts_from_hist(total)


@dataclass(frozen=True)
class EventRecords:
    """Per-trial audit record of one batch (hidden axes and both outcomes).

    Outcome entries are meaningful only where ``source_rejected`` is False.
    Intended for moderate n_pairs; memory grows linearly with the batch.
    """

    lambda_left: np.ndarray
    lambda_right: np.ndarray
    outcome_left: np.ndarray
    outcome_right: np.ndarray
    source_rejected: np.ndarray

    @property
    def n_emitted(self) -> int:
        return int(self.lambda_left.size)

    def counts(self) -> CoincidenceCounts:
        """Tally these events; equals run_batch of the generating config."""
        return _counts_from_hist(_tally(self.outcome_left, self.outcome_right, self.source_rejected))

    def _marginal(self, out: np.ndarray) -> tuple[int, int, int]:
        vals = out[~self.source_rejected]
        return int((vals == 1).sum()), int((vals == -1).sum()), int((vals == 0).sum())

    def left_marginal(self) -> tuple[int, int, int]:
        """(plus, minus, undetected) totals on the left side."""
        return self._marginal(self.outcome_left)

    def right_marginal(self) -> tuple[int, int, int]:
        return self._marginal(self.outcome_right)


def run_events(config: ExperimentConfig) -> EventRecords:
    """Run a batch and keep every trial's hidden axes and outcomes."""
    lam_l, lam_r, out_l, out_r, rej = [], [], [], [], []
    for j, size in _block_plan(config.n_pairs):
        a, b, c, d, e = _simulate_block(config, j, size)
        lam_l.append(a)
        lam_r.append(b)
        out_l.append(c)
        out_r.append(d)
        rej.append(e)
    return EventRecords(
        lambda_left=np.concatenate(lam_l),
        lambda_right=np.concatenate(lam_r),
        outcome_left=np.concatenate(out_l),
        outcome_right=np.concatenate(out_r),
        source_rejected=np.concatenate(rej),
    )
