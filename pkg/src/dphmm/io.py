"""Dataset ingestion and emission of plot-ready result files.

All files are comma-delimited with a header row; floating-point values are
written with 17 significant digits so a re-read reproduces the exact
float64.  GDP-style two-column (quantity, deflator) files are converted to
annualized-percent growth, y_t = 100 [log(q_t/q_{t-1}) - log(p_t/p_{t-1})],
which drops the first row.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np


class DatasetError(ValueError):
    """Malformed input data; message names the offending 1-based row."""


def _parse_cell(cell: str, row: int, path: str) -> float:
    text = cell.strip()
    if not text:
        raise DatasetError(f"{path}: row {row}: empty cell")
    try:
        value = float(text)
    except ValueError:
        raise DatasetError(f"{path}: row {row}: non-numeric cell {text!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"{path}: row {row}: non-finite value {text!r}")
    return value


def load_dataset(path: str, gdp_transform: bool = False) -> np.ndarray:
    """Parse a delimited series file.

    Accepted layouts: a single value column, or a leading label column
    followed by the value column(s).  A header row is detected by a
    non-numeric final cell.  With ``gdp_transform`` the last two columns are
    read as (quantity, deflator) levels and converted to growth.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    rows = [(i + 1, line) for i, line in enumerate(lines) if line.strip()]
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    first_cells = rows[0][1].split(",")
    try:
        float(first_cells[-1].strip())
    except ValueError:
        rows = rows[1:]  # header row
    if not rows:
        raise DatasetError(f"{path}: no data rows after header")

    n_value_cols = 2 if gdp_transform else 1
    values = []
    width = None
    for row, line in rows:
        cells = line.split(",")
        if width is None:
            width = len(cells)
            if width < n_value_cols or width > n_value_cols + 1:
                raise DatasetError(
                    f"{path}: row {row}: expected {n_value_cols} value column(s) "
                    f"plus an optional leading label, got {width} column(s)"
                )
        elif len(cells) != width:
            raise DatasetError(f"{path}: row {row}: inconsistent column count")
        values.append([_parse_cell(c, row, path) for c in cells[-n_value_cols:]])

    data = np.array(values)
    if not gdp_transform:
        y = data[:, 0]
        if len(y) < 2:
            raise DatasetError(f"{path}: need at least 2 observations, got {len(y)}")
        return y

    q, p = data[:, 0], data[:, 1]
    if np.any(q <= 0) or np.any(p <= 0):
        bad = int(np.argmax((q <= 0) | (p <= 0)))
        raise DatasetError(f"{path}: row {rows[bad][0]}: levels must be positive for the growth transform")
    y = 100.0 * (np.log(q[1:] / q[:-1]) - np.log(p[1:] / p[:-1]))
    if len(y) < 2:
        raise DatasetError(f"{path}: need at least 3 level rows for the growth transform")
    return y


# ---------------------------------------------------------------------------
# Result files
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    """17-significant-digit decimal rendering (lossless for float64)."""
    return f"{float(x):.17g}"


def _write_rows(path: str, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _check_pmf(name: str, vector: np.ndarray) -> None:
    total = float(np.sum(vector))
    if abs(total - 1.0) > 1e-9:
        raise RuntimeError(f"{name} sums to {total!r}, outside 1 +/- 1e-9")


def write_series(path: str, y: np.ndarray) -> None:
    _write_rows(path, ["y"], [[fmt(v)] for v in y])


def write_state_prob(path: str, state_prob: np.ndarray) -> None:
    n, k = state_prob.shape
    for t in range(n):
        _check_pmf(f"state_prob row t={t + 1}", state_prob[t])
    header = ["t"] + [f"regime_{i + 1}" for i in range(k)]
    _write_rows(path, header, [[str(t + 1)] + [fmt(v) for v in state_prob[t]] for t in range(n)])


def write_cp_pmf(path: str, cp_pmf: np.ndarray) -> None:
    k, m = cp_pmf.shape
    for i in range(k):
        _check_pmf(f"cp_pmf column tau_{i + 1}", cp_pmf[i])
    header = ["t"] + [f"tau_{i + 1}" for i in range(k)]
    _write_rows(path, header, [[str(t + 1)] + [fmt(cp_pmf[i, t]) for i in range(k)] for t in range(m)])


def write_param_summary(path: str, table: list) -> None:
    _write_rows(
        path,
        ["parameter", "mean", "sd", "serial_corr"],
        [[name, fmt(mean), fmt(sd), fmt(corr)] for name, mean, sd, corr in table],
    )


def write_k_distribution(path: str, k_pmf: np.ndarray) -> None:
    _check_pmf("k_distribution", k_pmf)
    _write_rows(path, ["k", "probability"], [[str(k), fmt(p)] for k, p in enumerate(k_pmf)])


def write_k_frequencies(path: str, counts: dict, n_replications: int) -> None:
    rows = [[str(k), str(c), fmt(c / n_replications)] for k, c in sorted(counts.items())]
    _write_rows(path, ["k", "count", "frequency"], rows)


def write_tv_report(path: str, tv_by_index: np.ndarray) -> None:
    _write_rows(path, ["t", "tv"], [[str(t + 1), fmt(v)] for t, v in enumerate(tv_by_index)])


# ---------------------------------------------------------------------------
# Run manifest
# ---------------------------------------------------------------------------

def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to reproduce a run's result files bitwise.

    Wall-clock timings are informational and the only fields expected to
    differ between reproductions.
    """

    command: str
    package_version: str
    config: dict
    seed: int
    dataset_digest: str | None = None
    replication_streams: list | None = None
    wall_seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "command": self.command,
            "package_version": self.package_version,
            "config": self.config,
            "seed": self.seed,
            "wall_seconds": self.wall_seconds,
        }
        if self.dataset_digest is not None:
            out["dataset_digest"] = self.dataset_digest
        if self.replication_streams is not None:
            out["replication_streams"] = self.replication_streams
        if self.notes:
            out["notes"] = self.notes
        return out


def write_manifest(path: str, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_out_dir(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir
