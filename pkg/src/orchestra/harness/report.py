"""Run records, aggregate means, and speedup reporting."""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Iterable

from ..errors import ConfigError
from ..qos import speedup

CSV_HEADER = "pattern,mode,n,input_mb,rep,time_s,bytes_mb"

# speedup metric -> (numerator mode, denominator mode)
SPEEDUP_DEFS = {
    "S_alpha": ("centralized_local", "distributed"),
    "S_beta": ("centralized_remote", "distributed"),
    "S": ("centralized", "distributed"),
}


@dataclass(frozen=True)
class RunRecord:
    pattern: str
    service_count: int
    mode: str
    input_mb: float
    repetition: int
    time_s: float
    bytes_mb: float


@dataclass
class RunReport:
    runs: list[RunRecord]
    mode_means: dict[tuple[str, int, str], float] = field(default_factory=dict)
    mode_mean_bytes: dict[tuple[str, int, str], float] = field(default_factory=dict)
    size_means: dict[tuple[str, int, str, float], float] = field(default_factory=dict)
    speedups: dict[tuple[str, int], dict[str, float]] = field(default_factory=dict)
    size_speedups: dict[tuple[str, int, str, float], float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "runs": [
                {
                    "pattern": r.pattern,
                    "mode": r.mode,
                    "n": r.service_count,
                    "input_mb": r.input_mb,
                    "rep": r.repetition,
                    "time_s": r.time_s,
                    "bytes_mb": r.bytes_mb,
                }
                for r in self.runs
            ],
            "means": [
                {
                    "pattern": p,
                    "n": n,
                    "mode": m,
                    "mean_time_s": t,
                    "mean_bytes_mb": self.mode_mean_bytes[(p, n, m)],
                }
                for (p, n, m), t in sorted(self.mode_means.items())
            ],
            "speedups": [
                {"pattern": p, "n": n, **{k: v for k, v in sorted(vals.items())}}
                for (p, n), vals in sorted(self.speedups.items())
            ],
            "per_size_speedups": [
                {"pattern": p, "n": n, "metric": metric, "input_mb": size, "value": v}
                for (p, n, metric, size), v in sorted(self.size_speedups.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        for r in sorted(self.runs, key=lambda r: (r.pattern, r.mode, r.service_count,
                                                  r.input_mb, r.repetition)):
            out.write(
                f"{r.pattern},{r.mode},{r.service_count},{r.input_mb!r},"
                f"{r.repetition},{r.time_s!r},{r.bytes_mb!r}\n"
            )
        return out.getvalue()

    def summary_table(self) -> str:
        """Text table with one speedup row per (pattern, N)."""
        lines = [f"{'Pattern':<14} {'N':>3}  {'S_alpha':>8} {'S_beta':>8} {'S':>8}"]
        for (pattern, n), vals in sorted(self.speedups.items()):
            cells = [
                f"{vals[k]:8.2f}" if k in vals else f"{'-':>8}"
                for k in ("S_alpha", "S_beta", "S")
            ]
            lines.append(f"{pattern:<14} {n:>3}  " + " ".join(cells))
        return "\n".join(lines)


def compute_report(records: Iterable[RunRecord]) -> RunReport:
    """Aggregate raw runs into mode means and the three speedup metrics."""
    runs = sorted(records, key=lambda r: (r.pattern, r.service_count, r.mode,
                                          r.input_mb, r.repetition))
    if not runs:
        raise ConfigError("no runs to report")
    report = RunReport(runs=runs)

    groups: dict[tuple[str, int, str], list[RunRecord]] = {}
    size_groups: dict[tuple[str, int, str, float], list[RunRecord]] = {}
    for r in runs:
        groups.setdefault((r.pattern, r.service_count, r.mode), []).append(r)
        size_groups.setdefault((r.pattern, r.service_count, r.mode, r.input_mb), []).append(r)
    for key, rs in groups.items():
        report.mode_means[key] = sum(x.time_s for x in rs) / len(rs)
        report.mode_mean_bytes[key] = sum(x.bytes_mb for x in rs) / len(rs)
    for key, rs in size_groups.items():
        report.size_means[key] = sum(x.time_s for x in rs) / len(rs)

    combos = sorted({(r.pattern, r.service_count) for r in runs})
    for pattern, n in combos:
        row: dict[str, float] = {}
        for metric, (num_mode, den_mode) in SPEEDUP_DEFS.items():
            num = report.mode_means.get((pattern, n, num_mode))
            den = report.mode_means.get((pattern, n, den_mode))
            if num is not None and den is not None:
                row[metric] = speedup(num, den)
                for (p2, n2, m2, size), mean in report.size_means.items():
                    if (p2, n2, m2) == (pattern, n, num_mode):
                        den_size = report.size_means.get((pattern, n, den_mode, size))
                        if den_size is not None:
                            report.size_speedups[(pattern, n, metric, size)] = speedup(mean, den_size)
        if row:
            report.speedups[(pattern, n)] = row
    return report
