"""Report assembly: one text file, one CSV, optional figures per run.

Files are named <subcommand>-<timestamp>.{txt,csv,png}.  The CSV payload is
fully deterministic for a fixed config and master seed: floats are written
with repr (shortest exact round trip), the timestamp appears only in the
text report and the file names, and the text report carries a sha256 of the
CSV payload so two runs can be compared at a glance.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

__all__ = ["Report", "WrittenReport", "csv_payload", "write_report"]


@dataclass(eq=False)
class Report:
    subcommand: str
    config_echo: dict
    lines: list
    csv_header: str
    csv_rows: list
    passed: bool | None = None
    data: dict = field(default_factory=dict)
    figures: tuple = ()


@dataclass(frozen=True)
class WrittenReport:
    txt: Path
    csv: Path
    figures: tuple
    csv_sha256: str


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int,)):
        return str(value)
    f = float(value)
    if f == int(f) and abs(f) < 1e15:
        # Integral-valued floats print without the trailing ".0" noise.
        return str(int(f))
    return repr(f)


def csv_payload(report: Report) -> str:
    out = [report.csv_header]
    for row in report.csv_rows:
        out.append(",".join(_cell(v) for v in row))
    return "\n".join(out) + "\n"


def write_report(report: Report, out_dir) -> WrittenReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    base = f"{report.subcommand}-{stamp}"

    payload = csv_payload(report)
    sha = hashlib.sha256(payload.encode()).hexdigest()
    csv_path = out / f"{base}.csv"
    csv_path.write_text(payload)

    txt_lines = [
        f"# {report.subcommand} report",
        f"generated: {datetime.now(timezone.utc).isoformat()}",
        "config: " + json.dumps(report.config_echo, sort_keys=True),
        "",
        *[str(x) for x in report.lines],
        "",
        f"csv sha256: {sha}",
    ]
    if report.passed is not None:
        txt_lines.append(f"status: {'pass' if report.passed else 'fail'}")
    txt_path = out / f"{base}.txt"
    txt_path.write_text("\n".join(txt_lines) + "\n")

    fig_paths = []
    for name, drawer in report.figures:
        fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
        try:
            drawer(ax)
            fig.tight_layout()
            path = out / f"{base}-{name}.png"
            fig.savefig(path)
            fig_paths.append(path)
        finally:
            plt.close(fig)

    return WrittenReport(txt=txt_path, csv=csv_path, figures=tuple(fig_paths), csv_sha256=sha)
