"""Metric records, CSV/manifest persistence, and Pareto filtering.

CSV values use shortest round-trip decimal formatting so a written file
parses back into records that compare equal bit-for-bit, which is what
the determinism guarantees are checked against.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

from .config import ExperimentConfig, config_echo, config_hash

__all__ = [
    "MetricsRecord", "CSV_COLUMNS", "records_equal", "format_csv", "parse_csv",
    "write_csv", "read_csv", "dominates", "pareto_filter", "build_manifest",
    "write_manifest",
]

CSV_COLUMNS = ("method", "seed", "eta", "phic", "pmd", "pfa", "rmse_m", "ser", "n_eval")


@dataclass(frozen=True)
class MetricsRecord:
    method: str
    seed: int
    eta: float
    phic: float
    pmd: float
    pfa: float
    rmse_m: float
    ser: float
    n_eval: int

    def __post_init__(self):
        for name in ("pmd", "pfa", "ser"):
            value = getattr(self, name)
            if not math.isnan(value) and not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not math.isnan(self.rmse_m) and self.rmse_m < 0:
            raise ValueError(f"rmse_m must be non-negative, got {self.rmse_m}")


def _float_eq(a: float, b: float) -> bool:
    return (math.isnan(a) and math.isnan(b)) or a == b


def records_equal(a: MetricsRecord, b: MetricsRecord) -> bool:
    """Field equality with NaN == NaN (undefined metrics round-trip too)."""
    return (
        a.method == b.method and a.seed == b.seed and a.n_eval == b.n_eval
        and all(_float_eq(getattr(a, f), getattr(b, f))
                for f in ("eta", "phic", "pmd", "pfa", "rmse_m", "ser"))
    )


def format_csv(records) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join([
            r.method, repr(r.seed), repr(r.eta), repr(r.phic), repr(r.pmd),
            repr(r.pfa), repr(r.rmse_m), repr(r.ser), repr(r.n_eval),
        ]))
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> list[MetricsRecord]:
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != ",".join(CSV_COLUMNS):
        raise ValueError("unrecognized CSV header")
    records = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"malformed CSV row: {ln!r}")
        records.append(MetricsRecord(
            method=parts[0], seed=int(parts[1]), eta=float(parts[2]),
            phic=float(parts[3]), pmd=float(parts[4]), pfa=float(parts[5]),
            rmse_m=float(parts[6]), ser=float(parts[7]), n_eval=int(parts[8]),
        ))
    return records


def write_csv(records, path: str) -> bytes:
    payload = format_csv(records).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(payload)
    return payload


def read_csv(path: str) -> list[MetricsRecord]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read())


def dominates(a: MetricsRecord, b: MetricsRecord) -> bool:
    """Strict Pareto dominance on (pmd down, ser down)."""
    return (a.pmd <= b.pmd and a.ser <= b.ser
            and (a.pmd < b.pmd or a.ser < b.ser))


def pareto_filter(records) -> list[MetricsRecord]:
    """Non-dominated subset; exact ties are all kept, so the filter is
    idempotent."""
    records = list(records)
    return [r for r in records
            if not any(dominates(other, r) for other in records)]


def build_manifest(exp: ExperimentConfig, csv_payloads: dict[str, bytes],
                   wall_time_s: float, warnings: list[str],
                   extra: dict | None = None) -> dict:
    """Run manifest; `result_hash` covers configuration and CSV bytes only,
    so identical runs produce identical hashes regardless of timing."""
    hasher = hashlib.sha256()
    hasher.update(config_hash(exp).encode("ascii"))
    for name in sorted(csv_payloads):
        hasher.update(name.encode("utf-8"))
        hasher.update(csv_payloads[name])
    manifest = {
        "version": 1,
        "package": "isacsim 0.1.0",
        "config": config_echo(exp),
        "config_hash": config_hash(exp),
        "outputs": sorted(csv_payloads),
        "result_hash": hasher.hexdigest(),
        "wall_time_s": wall_time_s,
        "warnings": list(warnings),
    }
    if extra:
        manifest.update(extra)
    return manifest


def write_manifest(manifest: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
