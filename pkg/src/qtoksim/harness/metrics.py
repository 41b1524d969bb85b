"""Aggregated scenario results and their JSON/CSV serializations.

Serialization is byte-deterministic: sorted keys, repr-formatted floats,
"\n" line endings, no timestamps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .config import ScenarioConfig


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    accepted: bool
    error_metric: float  # hamming weight (qrpuf), 1 - f_hat (uupuf), error count (hmp4)
    dwell_us: float
    lost: bool
    seed: int


@dataclass(frozen=True)
class Metrics:
    protocol: str
    adversary: str
    trials: int
    accepts: int
    lost_trials: int
    accept_rate: float
    honest_accept_rate: float | None
    adversary_accept_rate: float | None
    records: tuple[TrialRecord, ...]


def aggregate(cfg: ScenarioConfig, records: list[TrialRecord]) -> Metrics:
    accepts = sum(1 for r in records if r.accepted)
    lost = sum(1 for r in records if r.lost)
    rate = accepts / len(records)
    honest = rate if cfg.adversary == "none" else None
    adversarial = rate if cfg.adversary != "none" else None
    return Metrics(protocol=cfg.protocol, adversary=cfg.adversary,
                   trials=len(records), accepts=accepts, lost_trials=lost,
                   accept_rate=rate, honest_accept_rate=honest,
                   adversary_accept_rate=adversarial, records=tuple(records))


def metrics_json(metrics: Metrics, cfg: ScenarioConfig | None = None) -> str:
    doc = {
        "protocol": metrics.protocol,
        "adversary": metrics.adversary,
        "trials": metrics.trials,
        "accepts": metrics.accepts,
        "lost_trials": metrics.lost_trials,
        "accept_rate": metrics.accept_rate,
        "honest_accept_rate": metrics.honest_accept_rate,
        "adversary_accept_rate": metrics.adversary_accept_rate,
    }
    if cfg is not None:
        doc["config"] = cfg.model_dump(by_alias=True)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


CSV_COLUMNS = ("trial", "protocol", "adversary", "accepted", "error_metric",
               "dwell_us", "seed")


def trials_csv(metrics: Metrics) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in metrics.records:
        writer.writerow([r.trial, metrics.protocol, metrics.adversary,
                         int(r.accepted), repr(float(r.error_metric)),
                         repr(float(r.dwell_us)), r.seed])
    return buf.getvalue()


def write_outputs(metrics: Metrics, out_dir: str | Path,
                  cfg: ScenarioConfig | None = None) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "metrics.json"
    csv_path = out / "trials.csv"
    json_path.write_text(metrics_json(metrics, cfg), encoding="utf-8")
    csv_path.write_text(trials_csv(metrics), encoding="utf-8")
    return [json_path, csv_path]
