"""Binarisation of indicator maps and area-coverage scoring against ground truth."""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np


def normalize(values) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant map becomes all zeros (with a warning)."""
    v = np.asarray(getattr(values, "values", values), dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if not hi > lo:
        warnings.warn("constant indicator map; normalised to zeros")
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def otsu_threshold(values, bins: int = 256) -> float:
    """Threshold on [0, 1] maximising the between-class variance of a ``bins`` histogram.

    Returned as the lower edge of the first bin of the upper class, so that
    ``values >= threshold`` reproduces the histogram split exactly.
    """
    v = np.asarray(values, dtype=float).ravel()
    hist, edges = np.histogram(v, bins=bins, range=(0.0, 1.0))
    centers = 0.5 * (edges[:-1] + edges[1:])
    w0 = np.cumsum(hist)[:-1].astype(float)
    w1 = v.size - w0
    m0 = np.cumsum(hist * centers)[:-1]
    total = float(np.sum(hist * centers))
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (total - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between = np.nan_to_num(between, nan=-1.0)
    if between.max() <= 0:
        return 0.5
    return float(edges[int(np.argmax(between)) + 1])


def parse_threshold(policy) -> tuple[str, float | None]:
    """'otsu' or 'fixed:<tau>' (also a bare number) -> (kind, tau)."""
    if isinstance(policy, (int, float)):
        return "fixed", float(policy)
    text = str(policy).strip().lower()
    if text == "otsu":
        return "otsu", None
    if text.startswith("fixed:"):
        text = text[len("fixed:"):]
    try:
        return "fixed", float(text)
    except ValueError:
        raise ValueError(f"threshold policy must be 'otsu' or 'fixed:<tau>', got {policy!r}") from None


def binarize(normalized, policy="otsu") -> tuple[np.ndarray, float]:
    """Boolean map ``value >= tau`` and the tau used."""
    kind, tau = parse_threshold(policy)
    v = np.asarray(normalized, dtype=float)
    if kind == "otsu":
        tau = otsu_threshold(v)
    return v >= tau, float(tau)


@dataclass
class ReconstructionReport:
    coverage_percent: float
    false_positive_pixels: int
    true_positive_pixels: int
    truth_pixels: int
    threshold_used: float
    method: str = ""
    scenario: dict = field(default_factory=dict)


def coverage(binary, truth, *, threshold: float = float("nan"), method: str = "", scenario=None) -> ReconstructionReport:
    """Share of ground-truth pixels recovered (percent); false positives counted apart."""
    b = np.asarray(binary, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if b.shape != t.shape:
        raise ValueError(f"shape mismatch {b.shape} vs {t.shape}")
    tp = int(np.sum(b & t))
    n_truth = int(np.sum(t))
    pct = 100.0 * tp / n_truth if n_truth else 0.0
    return ReconstructionReport(
        coverage_percent=pct,
        false_positive_pixels=int(np.sum(b & ~t)),
        true_positive_pixels=tp,
        truth_pixels=n_truth,
        threshold_used=threshold,
        method=method,
        scenario=dict(scenario or {}),
    )


def evaluate(indicator_map, truth, policy="otsu", scenario=None) -> ReconstructionReport:
    """normalize -> binarize -> coverage in one call."""
    b, tau = binarize(normalize(indicator_map), policy)
    method = getattr(indicator_map, "method", "")
    return coverage(b, truth, threshold=tau, method=method, scenario=scenario)


REPORT_FIELDS = [
    "method",
    "aperture_deg",
    "snr_db",
    "alpha",
    "coverage_percent",
    "false_positive_pixels",
    "true_positive_pixels",
    "truth_pixels",
    "threshold_used",
]


def reports_to_csv(reports) -> str:
    """One row per (method, aperture, SNR) report."""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(
            {
                "method": r.method,
                "aperture_deg": _fmt(r.scenario.get("aperture_deg")),
                "snr_db": _fmt(r.scenario.get("snr_db")),
                "alpha": _fmt(r.scenario.get("alpha")),
                "coverage_percent": f"{r.coverage_percent:.2f}",
                "false_positive_pixels": r.false_positive_pixels,
                "true_positive_pixels": r.true_positive_pixels,
                "truth_pixels": r.truth_pixels,
                "threshold_used": f"{r.threshold_used:.6f}",
            }
        )
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return "inf"
    return format(v, "g") if isinstance(v, (int, float)) else str(v)


def reports_to_json(reports) -> str:
    return json.dumps([asdict(r) for r in reports], indent=2, sort_keys=True)
