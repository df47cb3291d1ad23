"""Config-document parsing and validation.

Documents are YAML (JSON works unchanged since YAML is a superset) with a
``mode`` plus flat or nested model sections. Angles are given in degrees and
are canonicalized mod 180. Unknown keys and out-of-range values raise
ConfigError naming the offending key.

Minimal sweep document::

    mode: sweep
    detection: fair
    eta: 1.0
    phi_deg: 22.5

Everything else is filled from defaults (16-point grid, 10^6 pairs per
point, seed 0, one shard).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass
from typing import Any, Mapping

import yaml

from .angles import radians_from_degrees
from .engine import UINT64_MAX, ExperimentConfig
from .errors import ConfigError
from .models import DetectionKind, DetectionModel, PairCorrelation, SourceKind, SourceModel
from .protocol import (
    SweepPlan,
    VerdictThresholds,
    default_control_grid,
    uniform_theta_grid,
)

SEED_ENV_VAR = "FAIRBELL_SEED"

MODES = ("run", "chsh", "sweep", "control", "classify")

_DETECTION_KINDS = {
    "fair": DetectionKind.FAIR_CONSTANT,
    "fair_constant": DetectionKind.FAIR_CONSTANT,
    "unfair_threshold": DetectionKind.UNFAIR_THRESHOLD,
    "unfair_power": DetectionKind.UNFAIR_POWER,
    "independent_errors": DetectionKind.INDEPENDENT_ERRORS,
}
_DETECTION_PARAMS = {
    DetectionKind.FAIR_CONSTANT: ("eta",),
    DetectionKind.UNFAIR_THRESHOLD: ("tau",),
    DetectionKind.UNFAIR_POWER: ("kappa",),
    DetectionKind.INDEPENDENT_ERRORS: ("eta", "flip_prob"),
}
_SOURCE_KINDS = {
    "singlet": SourceKind.SINGLET,
    "ideal_prepared": SourceKind.IDEAL_PREPARED,
    "polarizer_filtered": SourceKind.POLARIZER_FILTERED,
}
_CORRELATIONS = {
    "perpendicular": PairCorrelation.PERPENDICULAR,
    "parallel": PairCorrelation.PARALLEL,
}


def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _number(v: Any, key: str) -> float:
    if not _is_number(v):
        raise ConfigError(f"'{key}' must be a number, got {v!r}")
    return float(v)


def _angle_deg(v: Any, key: str) -> float:
    return radians_from_degrees(_number(v, key))


def _int_value(v: Any, key: str, minimum: int = 1, maximum: int | None = None) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"'{key}' must be an integer, got {v!r}")
    if v < minimum or (maximum is not None and v > maximum):
        hi = f", {maximum}]" if maximum is not None else ", inf)"
        raise ConfigError(f"'{key}' must lie in [{minimum}{hi}, got {v}")
    return v


def _float_in(v: Any, key: str, lo: float, hi: float, *, incl_lo=True, incl_hi=True) -> float:
    x = _number(v, key)
    ok_lo = x >= lo if incl_lo else x > lo
    ok_hi = x <= hi if incl_hi else x < hi
    if not (ok_lo and ok_hi):
        lb = "[" if incl_lo else "("
        rb = "]" if incl_hi else ")"
        raise ConfigError(f"'{key}' must lie in {lb}{lo}, {hi}{rb}, got {x}")
    return x


def _reject_unknown(section: Mapping[str, Any], where: str) -> None:
    if section:
        key = sorted(section)[0]
        label = f"{where}.{key}" if where else key
        raise ConfigError(f"unknown key '{label}'")


def _enum_value(v: Any, key: str, table: Mapping[str, Any]):
    if not isinstance(v, str) or v not in table:
        raise ConfigError(f"'{key}' must be one of {sorted(table)}, got {v!r}")
    return table[v]


def _parse_detection(doc: dict[str, Any]) -> DetectionModel:
    raw = doc.pop("detection", "fair")
    flat = {k: doc.pop(k) for k in ("eta", "tau", "kappa", "flip_prob") if k in doc}
    if isinstance(raw, str):
        kind = _enum_value(raw, "detection", _DETECTION_KINDS)
        section = flat
        where = ""
    elif isinstance(raw, Mapping):
        if flat:
            dup = sorted(flat)[0]
            raise ConfigError(f"'{dup}' given both at top level and inside 'detection'")
        section = dict(raw)
        kind = _enum_value(section.pop("kind", "fair"), "detection.kind", _DETECTION_KINDS)
        where = "detection"
    else:
        raise ConfigError(f"'detection' must be a kind name or a section, got {raw!r}")

    allowed = _DETECTION_PARAMS[kind]
    params: dict[str, float] = {}
    for key in allowed:
        if key in section:
            v = section.pop(key)
            label = f"{where}.{key}" if where else key
            if key == "eta":
                params[key] = _float_in(v, label, 0.0, 1.0)
            elif key == "tau":
                params[key] = _float_in(v, label, 0.0, 1.0, incl_hi=False)
            elif key == "kappa":
                params[key] = _float_in(v, label, 0.0, math.inf, incl_lo=False)
            else:
                params[key] = _float_in(v, label, 0.0, 0.5)
    for key in section:
        if key in ("eta", "tau", "kappa", "flip_prob"):
            raise ConfigError(f"'{key}' is not a parameter of detection kind '{kind.value}'")
    _reject_unknown(section, where)
    return DetectionModel(kind, **params)


def _parse_source(doc: dict[str, Any], default_kind: str = "singlet") -> SourceModel:
    raw = doc.pop("source", default_kind)
    flat: dict[str, Any] = {}
    for k in ("theta_deg", "pair_correlation"):
        if k in doc:
            flat[k] = doc.pop(k)
    if isinstance(raw, str):
        kind = _enum_value(raw, "source", _SOURCE_KINDS)
        section = flat
        where = ""
    elif isinstance(raw, Mapping):
        if flat:
            dup = sorted(flat)[0]
            raise ConfigError(f"'{dup}' given both at top level and inside 'source'")
        section = dict(raw)
        kind = _enum_value(section.pop("kind", default_kind), "source.kind", _SOURCE_KINDS)
        where = "source"
    else:
        raise ConfigError(f"'source' must be a kind name or a section, got {raw!r}")

    theta = 0.0
    if kind in (SourceKind.IDEAL_PREPARED, SourceKind.POLARIZER_FILTERED):
        if "theta_deg" in section:
            theta = _angle_deg(section.pop("theta_deg"), f"{where}.theta_deg" if where else "theta_deg")
    elif "theta_deg" in section:
        raise ConfigError("'theta_deg' only applies to theta-controlled sources")
    correlation = PairCorrelation.PERPENDICULAR
    if "pair_correlation" in section:
        if kind is SourceKind.IDEAL_PREPARED:
            raise ConfigError("'pair_correlation' does not apply to an ideal prepared source")
        correlation = _enum_value(
            section.pop("pair_correlation"),
            f"{where}.pair_correlation" if where else "pair_correlation",
            _CORRELATIONS,
        )
    _reject_unknown(section, where)
    return SourceModel(kind, theta, correlation)


def _parse_thresholds(doc: dict[str, Any]) -> VerdictThresholds:
    raw = doc.pop("verdict", {})
    if not isinstance(raw, Mapping):
        raise ConfigError(f"'verdict' must be a section, got {raw!r}")
    section = dict(raw)
    kwargs = {}
    if "detect_sigma" in section:
        kwargs["detect_amplitude_sigma"] = _float_in(
            section.pop("detect_sigma"), "verdict.detect_sigma", 0.0, math.inf, incl_lo=False
        )
    if "fair_sigma" in section:
        kwargs["fair_amplitude_sigma"] = _float_in(
            section.pop("fair_sigma"), "verdict.fair_sigma", 0.0, math.inf, incl_lo=False
        )
    if "detect_p_flat" in section:
        kwargs["detect_p_flat"] = _float_in(
            section.pop("detect_p_flat"), "verdict.detect_p_flat", 0.0, 1.0, incl_lo=False, incl_hi=False
        )
    if "fair_p_flat" in section:
        kwargs["fair_p_flat"] = _float_in(
            section.pop("fair_p_flat"), "verdict.fair_p_flat", 0.0, 1.0, incl_lo=False, incl_hi=False
        )
    _reject_unknown(section, "verdict")
    return VerdictThresholds(**kwargs)


def _detection_record(d: DetectionModel) -> dict[str, Any]:
    return {
        "kind": d.kind.value,
        "eta": d.eta,
        "tau": d.tau,
        "kappa": d.kappa,
        "flip_prob": d.flip_prob,
    }


def _source_record(s: SourceModel) -> dict[str, Any]:
    return {
        "kind": s.kind.value,
        "theta": s.theta,
        "pair_correlation": s.pair_correlation.value,
    }


def _thresholds_record(t: VerdictThresholds) -> dict[str, Any]:
    return {
        "detect_sigma": t.detect_amplitude_sigma,
        "detect_p_flat": t.detect_p_flat,
        "fair_sigma": t.fair_amplitude_sigma,
        "fair_p_flat": t.fair_p_flat,
    }


@dataclass(frozen=True)
class RunJob:
    config: ExperimentConfig
    resolved: dict


@dataclass(frozen=True)
class ChshJob:
    config: ExperimentConfig
    a: float
    a_prime: float
    b: float
    b_prime: float
    resolved: dict


@dataclass(frozen=True)
class SweepJob:
    plan: SweepPlan
    thresholds: VerdictThresholds
    resolved: dict


@dataclass(frozen=True)
class ControlJob:
    config: ExperimentConfig
    phi_pairs: tuple[tuple[float, float], ...]
    resolved: dict


@dataclass(frozen=True)
class ClassifyJob:
    thresholds: VerdictThresholds
    resolved: dict


Job = RunJob | ChshJob | SweepJob | ControlJob | ClassifyJob


def _resolve_seed(doc: dict[str, Any], override: int | None) -> int:
    if override is not None:
        return _int_value(override, "seed", 0, UINT64_MAX)
    if "seed" in doc:
        return _int_value(doc.pop("seed"), "seed", 0, UINT64_MAX)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
        return _int_value(value, SEED_ENV_VAR, 0, UINT64_MAX)
    return 0


def parse_config(
    doc: str | Mapping[str, Any] | None = None,
    *,
    mode: str | None = None,
    seed: int | None = None,
    shards: int | None = None,
) -> Job:
    """Validate a config document and resolve it into a runnable job.

    ``mode``/``seed``/``shards`` are caller overrides (the CLI passes its
    subcommand and flags). A document ``mode`` that contradicts the caller's
    is an error. The default seed may also come from the FAIRBELL_SEED
    environment variable; explicit values always win over it.
    """
    if isinstance(doc, str):
        try:
            doc = yaml.safe_load(doc)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config document is not valid YAML/JSON: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config document must be a mapping, got {type(doc).__name__}")
    work = dict(doc)

    doc_mode = work.pop("mode", None)
    if doc_mode is not None and doc_mode not in MODES:
        raise ConfigError(f"'mode' must be one of {list(MODES)}, got {doc_mode!r}")
    if mode is not None and doc_mode is not None and mode != doc_mode:
        raise ConfigError(f"config 'mode' is {doc_mode!r} but the command requested {mode!r}")
    effective_mode = mode or doc_mode
    if effective_mode is None:
        raise ConfigError("'mode' is required (run, chsh, sweep, control, or classify)")

    resolved_seed = _resolve_seed(work, seed)
    if shards is not None:
        resolved_shards = _int_value(shards, "shards", 1)
    elif "shards" in work:
        resolved_shards = _int_value(work.pop("shards"), "shards", 1)
    else:
        resolved_shards = 1

    if effective_mode == "run":
        job = _parse_run(work, resolved_seed, resolved_shards)
    elif effective_mode == "chsh":
        job = _parse_chsh(work, resolved_seed, resolved_shards)
    elif effective_mode == "sweep":
        job = _parse_sweep(work, resolved_seed, resolved_shards)
    elif effective_mode == "control":
        job = _parse_control(work, resolved_seed, resolved_shards)
    else:
        job = _parse_classify(work, resolved_seed, resolved_shards)
    return job


def _parse_run(work: dict[str, Any], seed: int, shards: int) -> RunJob:
    detection = _parse_detection(work)
    source = _parse_source(work)
    n_pairs = _int_value(work.pop("n_pairs", 1_000_000), "n_pairs", 1)
    phi1 = _angle_deg(work.pop("phi1_deg", 0.0), "phi1_deg")
    phi2 = _angle_deg(work.pop("phi2_deg", 22.5), "phi2_deg")
    _reject_unknown(work, "")
    config = ExperimentConfig(source, detection, phi1, phi2, n_pairs, seed, shards)
    resolved = {
        "mode": "run",
        "seed": seed,
        "shards": shards,
        "n_pairs": n_pairs,
        "phi1": config.phi1,
        "phi2": config.phi2,
        "source": _source_record(source),
        "detection": _detection_record(detection),
    }
    return RunJob(config=config, resolved=resolved)


def _parse_chsh(work: dict[str, Any], seed: int, shards: int) -> ChshJob:
    detection = _parse_detection(work)
    source = _parse_source(work)
    n_pairs = _int_value(work.pop("n_pairs", 1_000_000), "n_pairs", 1)
    a = _angle_deg(work.pop("a_deg", 0.0), "a_deg")
    a_prime = _angle_deg(work.pop("a_prime_deg", 45.0), "a_prime_deg")
    b = _angle_deg(work.pop("b_deg", 22.5), "b_deg")
    b_prime = _angle_deg(work.pop("b_prime_deg", 67.5), "b_prime_deg")
    _reject_unknown(work, "")
    config = ExperimentConfig(source, detection, a, b, n_pairs, seed, shards)
    resolved = {
        "mode": "chsh",
        "seed": seed,
        "shards": shards,
        "n_pairs": n_pairs,
        "angles": {"a": a, "a_prime": a_prime, "b": b, "b_prime": b_prime},
        "source": _source_record(source),
        "detection": _detection_record(detection),
    }
    return ChshJob(config=config, a=a, a_prime=a_prime, b=b, b_prime=b_prime, resolved=resolved)


def _parse_sweep(work: dict[str, Any], seed: int, shards: int) -> SweepJob:
    detection = _parse_detection(work)
    if "source" in work or "theta_deg" in work:
        raise ConfigError("sweep mode controls the source itself; use 'source_mode', not 'source'/'theta_deg'")
    thresholds = _parse_thresholds(work)

    raw = work.pop("sweep", {})
    if not isinstance(raw, Mapping):
        raise ConfigError(f"'sweep' must be a section, got {raw!r}")
    section = dict(raw)
    merged: dict[str, Any] = {}
    for key in ("phi_deg", "n_points", "n_per_point", "source_mode", "pair_correlation"):
        if key in work and key in section:
            raise ConfigError(f"'{key}' given both at top level and inside 'sweep'")
        if key in section:
            merged[key] = section.pop(key)
        elif key in work:
            merged[key] = work.pop(key)
    _reject_unknown(section, "sweep")
    _reject_unknown(work, "")

    phi = _angle_deg(merged.get("phi_deg", 22.5), "phi_deg")
    n_points = _int_value(merged.get("n_points", 16), "n_points", 8)
    n_per_point = _int_value(merged.get("n_per_point", 1_000_000), "n_per_point", 1)
    source_mode = SourceKind.IDEAL_PREPARED
    if "source_mode" in merged:
        source_mode = _enum_value(
            merged["source_mode"],
            "source_mode",
            {"ideal_prepared": SourceKind.IDEAL_PREPARED, "polarizer_filtered": SourceKind.POLARIZER_FILTERED},
        )
    correlation = PairCorrelation.PERPENDICULAR
    if "pair_correlation" in merged:
        correlation = _enum_value(merged["pair_correlation"], "pair_correlation", _CORRELATIONS)

    plan = SweepPlan(
        phi=phi,
        detection=detection,
        theta_grid=uniform_theta_grid(n_points),
        n_per_point=n_per_point,
        seed=seed,
        source_mode=source_mode,
        pair_correlation=correlation,
        shards=shards,
    )
    resolved = {
        "mode": "sweep",
        "seed": seed,
        "shards": shards,
        "phi": plan.phi,
        "n_points": n_points,
        "n_per_point": n_per_point,
        "source_mode": source_mode.value,
        "pair_correlation": correlation.value,
        "detection": _detection_record(detection),
        "verdict": _thresholds_record(thresholds),
    }
    return SweepJob(plan=plan, thresholds=thresholds, resolved=resolved)


def _parse_control(work: dict[str, Any], seed: int, shards: int) -> ControlJob:
    detection = _parse_detection(work)
    source = _parse_source(work)
    if source.kind is not SourceKind.SINGLET:
        raise ConfigError("'source' must stay singlet in control mode")
    n_pairs = _int_value(work.pop("n_pairs", 1_000_000), "n_pairs", 1)
    pairs_raw = work.pop("phi_pairs_deg", None)
    _reject_unknown(work, "")
    if pairs_raw is None:
        phi_pairs = default_control_grid()
    else:
        if not isinstance(pairs_raw, (list, tuple)) or len(pairs_raw) < 2:
            raise ConfigError("'phi_pairs_deg' must be a list of at least two [phi1, phi2] pairs")
        phi_pairs = []
        for i, entry in enumerate(pairs_raw):
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                raise ConfigError(f"'phi_pairs_deg[{i}]' must be a [phi1, phi2] pair")
            phi_pairs.append(
                (_angle_deg(entry[0], f"phi_pairs_deg[{i}][0]"), _angle_deg(entry[1], f"phi_pairs_deg[{i}][1]"))
            )
        phi_pairs = tuple(phi_pairs)
    config = ExperimentConfig(source, detection, 0.0, 0.0, n_pairs, seed, shards)
    resolved = {
        "mode": "control",
        "seed": seed,
        "shards": shards,
        "n_pairs": n_pairs,
        "phi_pairs": [[p1, p2] for p1, p2 in phi_pairs],
        "source": _source_record(source),
        "detection": _detection_record(detection),
    }
    return ControlJob(config=config, phi_pairs=tuple(phi_pairs), resolved=resolved)


def _parse_classify(work: dict[str, Any], seed: int, shards: int) -> ClassifyJob:
    thresholds = _parse_thresholds(work)
    _reject_unknown(work, "")
    resolved = {
        "mode": "classify",
        "seed": seed,
        "shards": shards,
        "verdict": _thresholds_record(thresholds),
    }
    return ClassifyJob(thresholds=thresholds, resolved=resolved)


def config_digest(resolved: Mapping[str, Any]) -> str:
    """Content hash of a resolved configuration (hex sha256)."""
    blob = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
