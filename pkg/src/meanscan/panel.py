"""Data model for longitudinal panels: an n-subjects x T-times x p-coordinates
tensor, plus CSV/binary persistence and validation.

The binary layout is fixed: magic bytes ``HDLP``, a version byte ``0x01``,
the three dimensions n, T, p as 64-bit little-endian unsigned integers, then
n*T*p IEEE-754 little-endian doubles in subject-major / time / coordinate
order.  An optional trailing block (marker byte ``0x47`` followed by n 32-bit
little-endian unsigned integers) stores per-subject group labels for
simulated mixture data.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"HDLP"
FORMAT_VERSION = 1
LABEL_MARKER = 0x47

# refuse to allocate panels beyond this many cells (corrupt headers)
MAX_CELLS = 1 << 31


class PanelFormatError(ValueError):
    """A panel file violates the CSV or binary layout contract."""


@dataclass(frozen=True)
class TimeInterval:
    """Closed 1-based time window [lo, hi] with at least two time points."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (1 <= self.lo < self.hi):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]: need 1 <= lo < hi")

    @property
    def length(self) -> int:
        return self.hi - self.lo + 1

    def splits(self) -> range:
        """All interior split times t with lo <= t < hi."""
        return range(self.lo, self.hi)


class PanelTensor:
    """Immutable observation array X[subject, time, coordinate].

    Values are stored as a contiguous float64 array in subject-major order so
    that each per-(subject, time) coordinate vector is a contiguous run.  Time
    indices are 1-based in every public API.
    """

    def __init__(self, values, group_labels=None):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"panel values must be 3-d (n, T, p), got shape {values.shape}")
        if min(values.shape) < 1:
            raise ValueError(f"panel dimensions must be positive, got shape {values.shape}")
        if group_labels is not None:
            group_labels = np.asarray(group_labels, dtype=np.int64)
            if group_labels.shape != (values.shape[0],):
                raise ValueError(
                    f"group_labels must have length n={values.shape[0]}, "
                    f"got shape {group_labels.shape}"
                )
            group_labels.setflags(write=False)
        values.setflags(write=False)
        self.values = values
        self.group_labels = group_labels

    @property
    def n_subjects(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    @property
    def n_coords(self) -> int:
        return self.values.shape[2]

    def whole_interval(self) -> TimeInterval:
        return TimeInterval(1, self.n_times)

    def window(self, interval: TimeInterval) -> np.ndarray:
        """Read-only view of the values restricted to a time interval."""
        if interval.hi > self.n_times:
            raise ValueError(
                f"interval [{interval.lo}, {interval.hi}] exceeds panel with T={self.n_times}"
            )
        return self.values[:, interval.lo - 1 : interval.hi, :]

    def __eq__(self, other):
        if not isinstance(other, PanelTensor):
            return NotImplemented
        if self.values.shape != other.values.shape:
            return False
        if not np.array_equal(self.values, other.values):
            return False
        a, b = self.group_labels, other.group_labels
        if (a is None) != (b is None):
            return False
        return a is None or np.array_equal(a, b)


@dataclass
class PanelDiagnostics:
    """Report-only validation result with capability flags."""

    violations: list = field(default_factory=list)
    variance_ustat_ok: bool = True
    test_ok: bool = True

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_panel(panel: PanelTensor) -> PanelDiagnostics:
    """List violated invariants and report which statistics the panel supports.

    The quadruple-based null-variance estimator enumerates ordered 4-tuples of
    distinct subjects, so it needs n >= 4; the pairwise estimator needs n >= 2.
    """
    report = PanelDiagnostics()
    n, T, p = panel.values.shape
    if not np.isfinite(panel.values).all():
        report.violations.append("values contain non-finite entries")
    if n < 2:
        report.violations.append(f"n_subjects={n} < 2")
    if T < 2:
        report.violations.append(f"n_times={T} < 2")
    if panel.group_labels is not None:
        labels = panel.group_labels
        if labels.min(initial=1) < 1:
            report.violations.append("group labels must be >= 1")
    report.test_ok = n >= 2 and T >= 2 and np.isfinite(panel.values).all()
    report.variance_ustat_ok = report.test_ok and n >= 4
    return report


def _check_dims(n: int, T: int, p: int) -> None:
    if n < 1 or T < 1 or p < 1:
        raise PanelFormatError(f"non-positive dimensions n={n}, T={T}, p={p}")
    if n * T * p > MAX_CELLS:
        raise PanelFormatError(f"dimension overflow: n*T*p = {n * T * p} exceeds {MAX_CELLS}")


def save_panel(panel: PanelTensor, path, format: str = "binary") -> None:
    """Write a panel to disk in the declared format (``binary`` or ``csv``)."""
    if format == "binary":
        _save_binary(panel, path)
    elif format == "csv":
        _save_csv(panel, path)
    else:
        raise ValueError(f"unknown panel format {format!r}")


def load_panel(path, format: str = "binary") -> PanelTensor:
    """Read a panel written by :func:`save_panel` and validate it."""
    if format == "binary":
        panel = _load_binary(path)
    elif format == "csv":
        panel = _load_csv(path)
    else:
        raise ValueError(f"unknown panel format {format!r}")
    report = validate_panel(panel)
    if report.violations:
        raise PanelFormatError("; ".join(report.violations))
    return panel


def _save_binary(panel: PanelTensor, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([FORMAT_VERSION]))
        fh.write(struct.pack("<QQQ", panel.n_subjects, panel.n_times, panel.n_coords))
        fh.write(panel.values.astype("<f8", copy=False).tobytes(order="C"))
        if panel.group_labels is not None:
            fh.write(bytes([LABEL_MARKER]))
            fh.write(panel.group_labels.astype("<u4").tobytes())


def _load_binary(path) -> PanelTensor:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC) + 1)
        if len(head) < len(MAGIC) + 1 or head[: len(MAGIC)] != MAGIC:
            raise PanelFormatError("malformed header: bad magic bytes")
        if head[len(MAGIC)] != FORMAT_VERSION:
            raise PanelFormatError(f"unsupported format version {head[len(MAGIC)]}")
        dims = fh.read(24)
        if len(dims) != 24:
            raise PanelFormatError("malformed header: truncated dimensions")
        n, T, p = struct.unpack("<QQQ", dims)
        _check_dims(n, T, p)
        payload = fh.read(8 * n * T * p)
        if len(payload) != 8 * n * T * p:
            raise PanelFormatError("truncated payload")
        values = np.frombuffer(payload, dtype="<f8").reshape(n, T, p)
        labels = None
        marker = fh.read(1)
        if marker:
            if marker[0] != LABEL_MARKER:
                raise PanelFormatError(f"unexpected trailing byte 0x{marker[0]:02x}")
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise PanelFormatError("truncated group-label block")
            labels = np.frombuffer(raw, dtype="<u4").astype(np.int64)
            if fh.read(1):
                raise PanelFormatError("trailing bytes after group-label block")
    if not np.isfinite(values).all():
        raise PanelFormatError("values contain non-finite entries")
    return PanelTensor(values, group_labels=labels)


CSV_HEADER = ["subject", "time", "coord", "value"]


def _save_csv(panel: PanelTensor, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        n, T, p = panel.values.shape
        for i in range(n):
            for t in range(T):
                row = panel.values[i, t]
                for j in range(p):
                    # repr() is the shortest decimal that round-trips exactly
                    writer.writerow([i + 1, t + 1, j + 1, repr(float(row[j]))])


def _load_csv(path) -> PanelTensor:
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError("malformed header: empty file") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise PanelFormatError(
                f"malformed header: expected {','.join(CSV_HEADER)}, got {','.join(header)}"
            )
        cells = []
        n = T = p = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise PanelFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                i, t, j = int(row[0]), int(row[1]), int(row[2])
                v = float(row[3])
            except ValueError as exc:
                raise PanelFormatError(f"line {lineno}: {exc}") from None
            if min(i, t, j) < 1:
                raise PanelFormatError(f"line {lineno}: indices are 1-based, got ({i},{t},{j})")
            if not math.isfinite(v):
                raise PanelFormatError(f"line {lineno}: non-finite value {row[3]!r}")
            cells.append((i, t, j, v))
            n, T, p = max(n, i), max(T, t), max(p, j)
    if not cells:
        raise PanelFormatError("incomplete panel: no data rows")
    _check_dims(n, T, p)
    values = np.empty((n, T, p), dtype=np.float64)
    seen = np.zeros((n, T, p), dtype=bool)
    for i, t, j, v in cells:
        if seen[i - 1, t - 1, j - 1]:
            raise PanelFormatError(f"duplicated cell (subject={i}, time={t}, coord={j})")
        seen[i - 1, t - 1, j - 1] = True
        values[i - 1, t - 1, j - 1] = v
    if not seen.all():
        i, t, j = np.argwhere(~seen)[0]
        raise PanelFormatError(
            f"incomplete panel: missing cell (subject={i + 1}, time={t + 1}, coord={j + 1})"
        )
    return PanelTensor(values)
