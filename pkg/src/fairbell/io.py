"""Result serialization: CSV and JSON-lines tables plus run manifests.

Integers are written exactly; reals are rendered with 9 significant digits
in CSV and at full precision in JSON lines. Every write is accompanied by a
manifest record (inline first line for JSON lines, a ``<out>.manifest.json``
sidecar for CSV files, stderr for CSV on stdout) so any stored table can be
traced back to the configuration that produced it.
"""

from __future__ import annotations

import io as _io
import json
import math
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from ._version import __version__
from .angles import degrees_from_radians, radians_from_degrees
from .engine import CoincidenceCounts, EventRecords
from .errors import ConfigError
from .protocol import (
    FairnessVerdict,
    SingletControlReport,
    SweepPoint,
    SweepResult,
)
from .stats import ChshResult, binomial_stderr, detected_rate

SWEEP_CSV_HEADER = (
    "theta_deg,n_pp,n_pm,n_mp,n_mm,n_single_left,n_single_right,"
    "n_none,n_source_rejected,r_d,r_d_stderr"
)
COUNTS_CSV_HEADER = (
    "n_pp,n_pm,n_mp,n_mm,n_single_left,n_single_right,n_none,n_source_rejected,n_emitted"
)
CHSH_CSV_HEADER = "setting,phi1_deg,phi2_deg,e_value,e_stderr,n_detected,s_value,s_stderr"
VERDICT_CSV_HEADER = (
    "classification,mean_level,amp_k2,phase_k2_deg,stderr_k2,"
    "amp_k4,phase_k4_deg,stderr_k4,chi2_flat,dof,p_flat,significance_sigma"
)
CONTROL_CSV_HEADER = (
    "phi1_deg,phi2_deg,n_pp,n_pm,n_mp,n_mm,n_single_left,n_single_right,"
    "n_none,n_source_rejected,r_d,r_d_stderr"
)
EVENT_LOG_HEADER = "trial,lambda_left,lambda_right,outcome_left,outcome_right,source_rejected"

_CHSH_SETTING_LABELS = ("ab", "ab_prime", "a_prime_b", "a_prime_b_prime")


def fmt_real(x: float) -> str:
    """Render a real with 9 significant digits."""
    return f"{x:.9g}"


def _json_safe(value: Any) -> Any:
    """Replace non-finite floats so records stay strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _json_line(record: dict[str, Any]) -> str:
    return json.dumps(_json_safe(record), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility metadata attached to every emitted table."""

    config_digest: str
    tool_version: str
    seed: int
    shard_count: int
    timestamp: str

    def to_record(self) -> dict[str, Any]:
        return {
            "record": "manifest",
            "config_digest": self.config_digest,
            "tool_version": self.tool_version,
            "seed": self.seed,
            "shard_count": self.shard_count,
            "timestamp": self.timestamp,
        }


def build_manifest(config_digest: str, seed: int, shard_count: int) -> RunManifest:
    return RunManifest(
        config_digest=config_digest,
        tool_version=__version__,
        seed=seed,
        shard_count=shard_count,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )


def _counts_cells(counts: CoincidenceCounts) -> list[str]:
    return [
        str(counts.n_pp),
        str(counts.n_pm),
        str(counts.n_mp),
        str(counts.n_mm),
        str(counts.n_single_left),
        str(counts.n_single_right),
        str(counts.n_none),
        str(counts.n_source_rejected),
    ]


def _counts_record(counts: CoincidenceCounts) -> dict[str, int]:
    return {
        "n_pp": counts.n_pp,
        "n_pm": counts.n_pm,
        "n_mp": counts.n_mp,
        "n_mm": counts.n_mm,
        "n_single_left": counts.n_single_left,
        "n_single_right": counts.n_single_right,
        "n_none": counts.n_none,
        "n_source_rejected": counts.n_source_rejected,
        "n_emitted": counts.n_emitted,
    }


def _sweep_csv(result: SweepResult) -> str:
    lines = [SWEEP_CSV_HEADER]
    for p in result.per_point:
        lines.append(
            ",".join(
                [fmt_real(degrees_from_radians(p.theta))]
                + _counts_cells(p.counts)
                + [fmt_real(p.r_d), fmt_real(p.std_error)]
            )
        )
    return "\n".join(lines) + "\n"


def _sweep_jsonl(result: SweepResult) -> str:
    lines = []
    for i, p in enumerate(result.per_point):
        rec = {
            "record": "sweep_point",
            "index": i,
            "theta_deg": degrees_from_radians(p.theta),
            **_counts_record(p.counts),
            "r_d": p.r_d,
            "r_d_stderr": p.std_error,
        }
        lines.append(_json_line(rec))
    return "\n".join(lines) + "\n"


def _counts_csv(counts: CoincidenceCounts) -> str:
    row = ",".join(_counts_cells(counts) + [str(counts.n_emitted)])
    return COUNTS_CSV_HEADER + "\n" + row + "\n"


def _chsh_csv(result: ChshResult) -> str:
    lines = [CHSH_CSV_HEADER]
    for label, (phi1, phi2), est in zip(_CHSH_SETTING_LABELS, result.angles, result.per_setting):
        lines.append(
            ",".join(
                [
                    label,
                    fmt_real(degrees_from_radians(phi1)),
                    fmt_real(degrees_from_radians(phi2)),
                    fmt_real(est.value),
                    fmt_real(est.std_error),
                    str(est.n_detected),
                    fmt_real(result.s_value),
                    fmt_real(result.std_error),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def _chsh_jsonl(result: ChshResult) -> str:
    lines = []
    for label, (phi1, phi2), est in zip(_CHSH_SETTING_LABELS, result.angles, result.per_setting):
        lines.append(
            _json_line(
                {
                    "record": "chsh_setting",
                    "setting": label,
                    "phi1_deg": degrees_from_radians(phi1),
                    "phi2_deg": degrees_from_radians(phi2),
                    "e_value": est.value,
                    "e_stderr": est.std_error,
                    "n_detected": est.n_detected,
                }
            )
        )
    lines.append(
        _json_line({"record": "chsh_summary", "s_value": result.s_value, "s_stderr": result.std_error})
    )
    return "\n".join(lines) + "\n"


def _verdict_cells(verdict: FairnessVerdict) -> dict[str, Any]:
    spec = verdict.spectrum
    k2 = spec.amplitudes[2]
    k4 = spec.amplitudes[4]
    return {
        "classification": verdict.classification.value,
        "mean_level": spec.mean_level,
        "amp_k2": k2.amplitude,
        "phase_k2_deg": math.degrees(k2.phase),
        "stderr_k2": k2.std_error,
        "amp_k4": k4.amplitude,
        "phase_k4_deg": math.degrees(k4.phase),
        "stderr_k4": k4.std_error,
        "chi2_flat": spec.chi2_flat,
        "dof": spec.dof,
        "p_flat": spec.p_flat,
        "significance_sigma": verdict.significance_sigma,
    }


def _verdict_csv(verdict: FairnessVerdict) -> str:
    cells = _verdict_cells(verdict)
    row = ",".join(
        str(cells[k]) if k in ("classification", "dof") else fmt_real(cells[k])
        for k in VERDICT_CSV_HEADER.split(",")
    )
    return VERDICT_CSV_HEADER + "\n" + row + "\n"


def _verdict_jsonl(verdict: FairnessVerdict) -> str:
    return _json_line({"record": "verdict", **_verdict_cells(verdict)}) + "\n"


def _control_csv(report: SingletControlReport) -> str:
    lines = [CONTROL_CSV_HEADER]
    for p in report.points:
        lines.append(
            ",".join(
                [fmt_real(degrees_from_radians(p.phi1)), fmt_real(degrees_from_radians(p.phi2))]
                + _counts_cells(p.counts)
                + [fmt_real(p.r_d), fmt_real(p.std_error)]
            )
        )
    return "\n".join(lines) + "\n"


def _control_jsonl(report: SingletControlReport) -> str:
    lines = []
    for i, p in enumerate(report.points):
        lines.append(
            _json_line(
                {
                    "record": "control_point",
                    "index": i,
                    "phi1_deg": degrees_from_radians(p.phi1),
                    "phi2_deg": degrees_from_radians(p.phi2),
                    **_counts_record(p.counts),
                    "r_d": p.r_d,
                    "r_d_stderr": p.std_error,
                }
            )
        )
    lines.append(
        _json_line(
            {
                "record": "control_summary",
                "mean_r_d": report.mean_r_d,
                "spread": report.spread,
                "max_deviation_sigma": report.max_deviation_sigma,
            }
        )
    )
    return "\n".join(lines) + "\n"


def emit_results(
    result: CoincidenceCounts | ChshResult | SweepResult | FairnessVerdict | SingletControlReport,
    fmt: str = "csv",
) -> str:
    """Serialize a result to its CSV or JSON-lines table (manifest excluded)."""
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"format must be 'csv' or 'jsonl', got {fmt!r}")
    if isinstance(result, SweepResult):
        return _sweep_csv(result) if fmt == "csv" else _sweep_jsonl(result)
    if isinstance(result, CoincidenceCounts):
        if fmt == "csv":
            return _counts_csv(result)
        return _json_line({"record": "counts", **_counts_record(result)}) + "\n"
    if isinstance(result, ChshResult):
        return _chsh_csv(result) if fmt == "csv" else _chsh_jsonl(result)
    if isinstance(result, FairnessVerdict):
        return _verdict_csv(result) if fmt == "csv" else _verdict_jsonl(result)
    if isinstance(result, SingletControlReport):
        return _control_csv(result) if fmt == "csv" else _control_jsonl(result)
    raise TypeError(f"cannot serialize {type(result).__name__}")


def write_results(result, manifest: RunManifest, out: str | Path | None, fmt: str = "csv") -> None:
    """Write a result table plus its companion manifest record.

    ``out=None`` writes the table to stdout. JSON lines carry the manifest as
    their first record; CSV gets a ``<out>.manifest.json`` sidecar, or the
    manifest goes to stderr when the table itself goes to stdout.
    """
    table = emit_results(result, fmt)
    manifest_line = _json_line(manifest.to_record())
    if fmt == "jsonl":
        payload = manifest_line + "\n" + table
        if out is None:
            sys.stdout.write(payload)
        else:
            Path(out).write_text(payload, encoding="utf-8")
        return
    if out is None:
        sys.stdout.write(table)
        sys.stderr.write(manifest_line + "\n")
    else:
        path = Path(out)
        path.write_text(table, encoding="utf-8")
        Path(str(path) + ".manifest.json").write_text(manifest_line + "\n", encoding="utf-8")


def _split_csv(text: str, expected_header: str, what: str) -> list[list[str]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != expected_header:
        raise ConfigError(f"{what} must start with the header: {expected_header}")
    return [ln.split(",") for ln in lines[1:]]


def _parse_int_cell(cell: str, key: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise ConfigError(f"'{key}' must be an integer, got {cell!r}") from None


def _parse_real_cell(cell: str, key: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ConfigError(f"'{key}' must be a number, got {cell!r}") from None


def parse_sweep_csv(text: str) -> SweepResult:
    """Rebuild a sweep from its CSV table.

    Counts are recovered exactly; the detected rate and its error are
    recomputed from the counts and checked against the stored 9-digit values.
    """
    rows = _split_csv(text, SWEEP_CSV_HEADER, "sweep CSV")
    if not rows:
        raise ConfigError("sweep CSV has no data rows")
    names = SWEEP_CSV_HEADER.split(",")
    points = []
    for row in rows:
        if len(row) != len(names):
            raise ConfigError(f"sweep CSV row has {len(row)} cells, expected {len(names)}")
        cells = dict(zip(names, row))
        theta = radians_from_degrees(_parse_real_cell(cells["theta_deg"], "theta_deg"))
        field_values = {name: _parse_int_cell(cells[name], name) for name in names[1:9]}
        counts = CoincidenceCounts(**field_values, n_emitted=sum(field_values.values()))
        r_d = detected_rate(counts)
        stored = _parse_real_cell(cells["r_d"], "r_d")
        if abs(stored - r_d) > 1e-7 * max(1.0, abs(r_d)):
            raise ConfigError(f"stored r_d {stored!r} inconsistent with counts (expected {r_d!r})")
        points.append(
            SweepPoint(
                theta=theta,
                counts=counts,
                r_d=r_d,
                std_error=binomial_stderr(counts.detected(), counts.n_emitted),
            )
        )
    return SweepResult(plan=None, per_point=tuple(points))


def read_sweep_csv(path: str | Path) -> SweepResult:
    return parse_sweep_csv(Path(path).read_text(encoding="utf-8"))


def parse_counts_csv(text: str) -> CoincidenceCounts:
    rows = _split_csv(text, COUNTS_CSV_HEADER, "counts CSV")
    if len(rows) != 1:
        raise ConfigError(f"counts CSV must have exactly one data row, got {len(rows)}")
    names = COUNTS_CSV_HEADER.split(",")
    cells = dict(zip(names, rows[0]))
    return CoincidenceCounts(**{name: _parse_int_cell(cells[name], name) for name in names})


def write_event_log(records: EventRecords, path: str | Path) -> None:
    """Dump a per-trial audit log (one row per emitted pair)."""
    buf = _io.StringIO()
    buf.write(EVENT_LOG_HEADER + "\n")
    out_l = records.outcome_left
    out_r = records.outcome_right
    rej = records.source_rejected
    for i in range(records.n_emitted):
        buf.write(
            f"{i},{fmt_real(records.lambda_left[i])},{fmt_real(records.lambda_right[i])},"
            f"{int(out_l[i])},{int(out_r[i])},{int(rej[i])}\n"
        )
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
