"""Dataset loaders and result files."""

import csv
import io
import json
import math
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from resexp.core.config import OUTPUT_FORMATS
from resexp.core.errors import DimensionMismatchError, ParameterDomainError
from resexp.models.report import DeconvSignals, QuarticRecord, TraceRow, TrialReport
from resexp.utils.validators import as_points

POINT_SUFFIXES = {
    ".csv": "csv",
    ".xyz": "xyz",
    ".pts": "xyz",
    ".txt": "xyz",
    ".fvecs": "fvecs",
}


def _require_file(path: Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Data file not found: {path}")
    return path


def _has_header(path: Path, delimiter: str = ",") -> bool:
    with open(path, encoding="utf-8") as f:
        first = f.readline().strip()
    try:
        [float(v) for v in first.split(delimiter) if v.strip()]
    except ValueError:
        return True
    return False


def load_points_csv(path: Path) -> np.ndarray:
    """
    Load a points CSV: one point per row, one coordinate per column.

    A non-numeric first row is treated as a header.

    Raises:
        FileNotFoundError: If the file doesn't exist
        ValueError: If a row is not numeric
    """
    path = _require_file(path)
    skip = 1 if _has_header(path) else 0
    return as_points(np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2), str(path))


def load_xyz(path: Path) -> np.ndarray:
    """Load a whitespace-separated XYZ cloud; extra columns (normals, colors) are ignored."""
    path = _require_file(path)
    data = np.loadtxt(path, comments="#", usecols=(0, 1, 2), ndmin=2)
    return as_points(data, str(path), dim=3)


def load_fvecs(path: Path, limit: int | None = None) -> np.ndarray:
    """
    Load an fvecs file: per vector a little-endian int32 dimension then that many float32.

    Args:
        path: File path
        limit: Read only the first ``limit`` vectors

    Returns:
        ``(n, d)`` float64 array

    Raises:
        DimensionMismatchError: If the file is truncated or vector dimensions differ
    """
    path = _require_file(path)
    raw = np.fromfile(path, dtype="<i4")
    if raw.size == 0:
        return np.empty((0, 0))

    d = int(raw[0])
    if d <= 0 or raw.size % (d + 1):
        raise DimensionMismatchError(f"{path} is not a valid fvecs file (d={d}, words={raw.size})")
    rows = raw.reshape(-1, d + 1)
    if np.any(rows[:, 0] != d):
        raise DimensionMismatchError(f"{path} mixes vector dimensions")
    if limit is not None:
        rows = rows[:limit]
    return rows[:, 1:].copy().view("<f4").astype(np.float64)


def load_points(path: Path, limit: int | None = None) -> np.ndarray:
    """
    Load points by file suffix (``.csv``, ``.xyz``/``.pts``/``.txt``, ``.fvecs``).

    Args:
        path: File path
        limit: Keep only the first ``limit`` points

    Raises:
        ParameterDomainError: If the suffix is not supported
    """
    path = Path(path)
    kind = POINT_SUFFIXES.get(path.suffix.lower())
    if kind is None:
        raise ParameterDomainError(
            f"Unsupported data format '{path.suffix}', expected one of "
            f"{', '.join(sorted(POINT_SUFFIXES))}"
        )
    if kind == "fvecs":
        return load_fvecs(path, limit)

    points = load_points_csv(path) if kind == "csv" else load_xyz(path)
    return points if limit is None else points[:limit]


def load_signal_csv(path: Path, column: int = 0) -> np.ndarray:
    """Load one column of a signal CSV as a 1-D array."""
    path = _require_file(path)
    skip = 1 if _has_header(path) else 0
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    if column >= data.shape[1]:
        raise DimensionMismatchError(f"{path} has {data.shape[1]} columns, asked for {column}")
    return data[:, column].copy()


def save_signal_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    """Write equal-length signals as named CSV columns at full precision."""
    lengths = {len(v) for v in columns.values()}
    if len(lengths) != 1:
        raise DimensionMismatchError(f"signal columns differ in length: {sorted(lengths)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
    np.savetxt(path, data, delimiter=",", fmt="%.17g", header=",".join(columns), comments="")


# Result files


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _json_value(value):
    # JSON has no NaN or infinity
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _parse_optional_float(text: str) -> float | None:
    return None if text == "" else float(text)


def _parse_optional_bool(text: str) -> bool | None:
    if text == "":
        return None
    return text == "true"


_CSV_PARSERS = {
    "trial": int,
    "seed": int,
    "T": int,
    "iterations": int,
    "mu0": float,
    "final_objective": float,
    "wall_ms": float,
    "relative_error": _parse_optional_float,
    "success": _parse_optional_bool,
    "error": lambda text: text or None,
}

# Report fields that are always numbers; null in JSON reads back as NaN
_FLOAT_FIELDS = ("mu0", "final_objective", "wall_ms")

QUARTIC_COLUMNS = ("y1", "y2", "theta1", "theta2", "energy1", "energy2", "re1", "re2", "verdict")


def _pair(values: tuple[float, ...]) -> list[str]:
    cells = [_csv_cell(float(v)) for v in values[:2]]
    return cells + [""] * (2 - len(cells))


class ResultFileService:
    """Writes and reads benchmark result files in one format."""

    def __init__(self, fmt: str = "jsonl"):
        """
        Initialize the result file service.

        Args:
            fmt: ``jsonl`` or ``csv``

        Raises:
            ParameterDomainError: If the format is unknown
        """
        if fmt not in OUTPUT_FORMATS:
            raise ParameterDomainError(f"Unknown output format '{fmt}'")
        self.fmt = fmt

    def _render_rows(self, rows: Sequence[dict], columns: list[str]) -> str:
        if self.fmt == "jsonl":
            return "".join(
                json.dumps({k: _json_value(v) for k, v in row.items()}, allow_nan=False) + "\n"
                for row in rows
            )

        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row.values()])
        return buffer.getvalue()

    @staticmethod
    def _write(path: Path, text: str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        return path

    def render(self, reports: Sequence[TrialReport]) -> str:
        """
        Render reports as JSON lines or CSV text.

        JSON lines keep the TrialReport field order and write non-finite numbers as
        ``null``; CSV writes a header row and floats with 17 significant digits.

        Raises:
            ParameterDomainError: If reports is empty
        """
        if not reports:
            raise ParameterDomainError("no reports to emit")
        return self._render_rows([r.to_dict() for r in reports], TrialReport.field_names())

    def emit(self, reports: Sequence[TrialReport], path: Path) -> Path:
        """
        Write reports to ``path``.

        Returns:
            The written path

        Raises:
            ParameterDomainError: If reports is empty
            OSError: If the path is not writable
        """
        return self._write(path, self.render(reports))

    def read(self, path: Path) -> list[TrialReport]:
        """Parse a report file written in this service's format."""
        path = _require_file(path)
        with open(path, encoding="utf-8", newline="") as f:
            if self.fmt == "jsonl":
                return [self._report_from_json(line) for line in f if line.strip()]
            rows = list(csv.DictReader(f))

        reports = []
        for row in rows:
            values = {name: _CSV_PARSERS.get(name, str)(text) for name, text in row.items()}
            reports.append(TrialReport(**values))
        return reports

    @staticmethod
    def _report_from_json(line: str) -> TrialReport:
        values = json.loads(line)
        for name in _FLOAT_FIELDS:
            if values.get(name) is None:
                values[name] = math.nan
        return TrialReport(**values)

    def emit_traces(self, rows: Sequence[TraceRow], path: Path) -> Path:
        """Write one row per arm, trial and iteration: ``t``, ``mu`` and both objectives."""
        if not rows:
            raise ParameterDomainError("no trace rows to emit")
        return self._write(
            path, self._render_rows([r.to_dict() for r in rows], TraceRow.field_names())
        )

    def emit_signals(self, signals: Sequence[DeconvSignals], directory: Path) -> list[Path]:
        """
        Write recovered deconvolution signals and kernels as CSV files.

        Per arm and trial, ``trial<i>_<arm>_signal.csv`` holds the observation, the recovered
        signal and its blurred fit; ``trial<i>_<arm>_kernel.csv`` holds the kernel.
        """
        directory = Path(directory)
        written = []
        for s in signals:
            signal_path = directory / f"trial{s.trial}_{s.arm}_signal.csv"
            kernel_path = directory / f"trial{s.trial}_{s.arm}_kernel.csv"
            save_signal_csv(
                signal_path, {"observed": s.observed, "signal": s.signal, "fit": s.fit}
            )
            save_signal_csv(kernel_path, {"kernel": s.kernel})
            written += [signal_path, kernel_path]
        return written

    @staticmethod
    def emit_quartic_records(records: Sequence[QuarticRecord], path: Path) -> Path:
        """
        Write one CSV row per quartic instance.

        Instances with a single minimum leave the second-minimum columns empty; an infinite
        RE constant is written as ``inf``.
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(QUARTIC_COLUMNS)
            for rec in records:
                writer.writerow(
                    [_csv_cell(rec.y1), _csv_cell(rec.y2)]
                    + _pair(rec.thetas)
                    + _pair(rec.energies)
                    + _pair(rec.re_constants)
                    + [rec.verdict.value]
                )
        return path


def format_results(reports: Sequence[TrialReport], fmt: str = "jsonl") -> str:
    """Render reports as JSON lines or CSV text (see ``ResultFileService.render``)."""
    return ResultFileService(fmt).render(reports)


def emit_results(reports: Sequence[TrialReport], path: Path, fmt: str = "jsonl") -> Path:
    """
    Write reports to ``path`` as JSON lines or CSV.

    Raises:
        ParameterDomainError: If reports is empty or the format is unknown
        OSError: If the path is not writable
    """
    return ResultFileService(fmt).emit(reports, path)


def read_results(path: Path, fmt: str | None = None) -> list[TrialReport]:
    """Parse a file written by emit_results; the format defaults to the file suffix."""
    fmt = fmt or ("csv" if Path(path).suffix.lower() == ".csv" else "jsonl")
    return ResultFileService(fmt).read(path)
