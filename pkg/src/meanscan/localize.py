"""Post-hoc localization of which coordinates shifted at a change-point.

For each coordinate, subjects' values just after the change-point are
compared with the values just before it by a paired t-test; coordinates are
then selected under false-discovery-rate control, either Benjamini-Hochberg
or Storey's adaptive variant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .panel import PanelTensor

FDR_METHODS = ("bh", "storey")
DEFAULT_STOREY_LAMBDA = 0.5


def paired_mean_shift_test(panel: PanelTensor, tau: int, window: int = 1):
    """Per-coordinate paired t-statistics across a change-point.

    For subject i and coordinate j the paired difference is the mean of the
    post-window [tau+1, tau+window] minus the mean of the pre-window
    [tau-window+1, tau].  Returns (t_stats, p_values, degenerate) arrays of
    length p; coordinates with zero difference variance get t = 0, p = 1 and
    a degeneracy flag.
    """
    n, T, p = panel.values.shape
    if n < 2:
        raise ValueError(f"paired test needs n >= 2, got n={n}")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not (1 <= tau < T):
        raise ValueError(f"change-point {tau} outside [1, {T})")
    if tau - window + 1 < 1 or tau + window > T:
        raise ValueError(
            f"window {window} around change-point {tau} leaves [1, {T}]"
        )
    pre = panel.values[:, tau - window : tau, :].mean(axis=1)
    post = panel.values[:, tau : tau + window, :].mean(axis=1)
    diff = post - pre
    mean = diff.mean(axis=0)
    sd = diff.std(axis=0, ddof=1)
    degenerate = sd == 0.0
    t_stats = np.zeros(p)
    np.divide(mean, sd / np.sqrt(n), out=t_stats, where=~degenerate)
    p_values = np.ones(p)
    p_values[~degenerate] = 2.0 * student_t.sf(np.abs(t_stats[~degenerate]), df=n - 1)
    np.clip(p_values, 0.0, 1.0, out=p_values)
    return t_stats, p_values, degenerate


def fdr_select(
    p_values,
    q: float,
    method: str = "bh",
    storey_lambda: float = DEFAULT_STOREY_LAMBDA,
) -> np.ndarray:
    """Indices (0-based) selected at false-discovery-rate level q.

    ``bh`` runs the step-up rule p_(k) <= k q / m.  ``storey`` replaces m by
    m * pi0_hat with pi0_hat = #{p > lambda} / (m (1 - lambda)) capped at 1,
    so it reduces to BH exactly when pi0_hat reaches the cap.
    """
    if not (0.0 < q < 1.0):
        raise ValueError(f"q must lie in (0, 1), got {q}")
    if method not in FDR_METHODS:
        raise ValueError(f"method must be one of {FDR_METHODS}, got {method!r}")
    p_values = np.asarray(p_values, dtype=np.float64)
    if p_values.ndim != 1 or p_values.size == 0:
        raise ValueError("p_values must be a nonempty 1-d sequence")
    if (p_values < 0).any() or (p_values > 1).any():
        raise ValueError("p-values must lie in [0, 1]")
    m = p_values.size
    m_eff = float(m)
    if method == "storey":
        if not (0.0 < storey_lambda < 1.0):
            raise ValueError(f"storey lambda must lie in (0, 1), got {storey_lambda}")
        pi0 = np.sum(p_values > storey_lambda) / (m * (1.0 - storey_lambda))
        m_eff = m * min(pi0, 1.0)
    order = np.argsort(p_values, kind="stable")
    ranked = p_values[order]
    ranks = np.arange(1, m + 1)
    if m_eff == 0.0:
        # estimated zero true nulls: every hypothesis is selected
        passing = np.ones(m, dtype=bool)
    else:
        passing = ranked <= ranks * q / m_eff
    if not passing.any():
        return np.empty(0, dtype=np.int64)
    cutoff = int(np.nonzero(passing)[0][-1]) + 1
    return np.sort(order[:cutoff])


@dataclass
class LocalizationReport:
    """Which coordinates shifted at a change-point, at a given FDR level."""

    change_point: int
    t_stats: np.ndarray
    p_values: np.ndarray
    selected: np.ndarray  # 1-based coordinate indices
    fdr_level: float
    method: str
    window: int = 1

    def to_dict(self) -> dict:
        return {
            "change_point": self.change_point,
            "fdr_level": self.fdr_level,
            "method": self.method,
            "window": self.window,
            "n_selected": int(self.selected.size),
            "selected": [int(j) for j in self.selected],
            "t_stats": [float(v) for v in self.t_stats],
            "p_values": [float(v) for v in self.p_values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        chosen = set(int(j) for j in self.selected)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["coord", "t_stat", "p_value", "selected"])
            for j, (t, p) in enumerate(zip(self.t_stats, self.p_values), start=1):
                writer.writerow([j, repr(float(t)), repr(float(p)), int(j in chosen)])


def localization_report(
    panel: PanelTensor,
    tau: int,
    window: int = 1,
    q: float = 0.01,
    method: str = "storey",
    storey_lambda: float = DEFAULT_STOREY_LAMBDA,
) -> LocalizationReport:
    """Run the paired tests at a change-point and select coordinates by FDR."""
    t_stats, p_values, _ = paired_mean_shift_test(panel, tau, window)
    chosen = fdr_select(p_values, q, method=method, storey_lambda=storey_lambda)
    return LocalizationReport(
        change_point=tau,
        t_stats=t_stats,
        p_values=p_values,
        selected=chosen + 1,
        fdr_level=q,
        method=method,
        window=window,
    )
