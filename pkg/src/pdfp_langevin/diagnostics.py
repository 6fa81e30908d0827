"""Sample-quality measures: PSNR, ESJD, ESS and KS distance."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, fields
from typing import Callable, NamedTuple, Optional

import numpy as np

__all__ = [
    "DiagnosticsError",
    "PSNR_CAP",
    "psnr",
    "esjd",
    "autocorrelation",
    "EssResult",
    "ess_details",
    "ess",
    "ess_summary",
    "ks_distance",
    "ks_noise_scale",
    "DiagnosticsReport",
    "REPORT_COLUMNS",
    "report_csv_row",
]

PSNR_CAP = 200.0


class DiagnosticsError(ValueError):
    pass


def psnr(reference, estimate, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` in dB, capped at ``PSNR_CAP`` for zero MSE."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise DiagnosticsError(f"shape mismatch {ref.shape} vs {est.shape}")
    if not peak > 0:
        raise DiagnosticsError("peak must be positive")
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse))


def esjd(samples) -> float:
    """Mean of ``||theta_{n+1} - theta_n||^2`` over a chain (first axis = time)."""
    x = np.asarray(samples, dtype=np.float64)
    if x.shape[0] < 2:
        raise DiagnosticsError("ESJD needs at least two samples")
    d = np.diff(x.reshape(x.shape[0], -1), axis=0)
    return float(np.mean(np.sum(d * d, axis=1)))


def autocorrelation(x) -> np.ndarray:
    """Normalised autocorrelation at all lags (biased estimator, via FFT)."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    if acov[0] <= 0:
        raise DiagnosticsError("zero-variance series: ESS undefined")
    return acov / acov[0]


class EssResult(NamedTuple):
    value: float
    raw: float
    clamped: bool


def ess_details(x) -> EssResult:
    """Effective sample size with Geyer's initial positive sequence.

    Pairs ``rho_{2k} + rho_{2k+1}`` are summed while positive; the
    integrated autocorrelation time is ``-1 + 2 * sum(pairs)``. The result
    is clamped to ``[1, N]`` and flagged if the raw value fell outside.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    n = x.size
    if n < 10:
        raise DiagnosticsError("ESS needs at least 10 samples")
    if np.ptp(x) == 0.0:
        raise DiagnosticsError("zero-variance series: ESS undefined")
    rho = autocorrelation(x)
    m = (n - 1) // 2
    pairs = rho[0 : 2 * m : 2] + rho[1 : 2 * m + 1 : 2]
    neg = np.flatnonzero(pairs <= 0)
    stop = neg[0] if neg.size else pairs.size
    tau = -1.0 + 2.0 * float(pairs[:stop].sum())
    raw = n / tau if tau > 0 else np.inf
    value = float(min(max(raw, 1.0), n))
    return EssResult(value, float(raw), not (1.0 <= raw <= n))


def ess(x) -> float:
    return ess_details(x).value


def ess_summary(samples) -> dict:
    """Per-column ESS of an ``(n, k)`` array summarised as min/mean/median."""
    s = np.asarray(samples, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    vals = []
    for j in range(s.shape[1]):
        try:
            vals.append(ess(s[:, j]))
        except DiagnosticsError:
            continue
    if not vals:
        return {"ess_min": float("nan"), "ess_mean": float("nan"), "ess_median": float("nan")}
    v = np.array(vals)
    return {"ess_min": float(v.min()), "ess_mean": float(v.mean()), "ess_median": float(np.median(v))}


def ks_distance(samples, cdf: Callable) -> float:
    """``sup |F_n - F|`` over the sample points."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise DiagnosticsError("KS distance of an empty sample")
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_noise_scale(n_eff: float) -> float:
    """Typical KS distance of ``n_eff`` exact draws (mean of Kolmogorov law)."""
    return 0.8687 / np.sqrt(n_eff)


@dataclass
class DiagnosticsReport:
    sampler: str
    K: Optional[int]
    delta: float
    rho: Optional[float]
    n_samples: int
    acceptance_rate: float
    psnr: Optional[float] = None
    esjd: Optional[float] = None
    ess_min: Optional[float] = None
    ess_mean: Optional[float] = None
    ess_median: Optional[float] = None
    ks: Optional[float] = None


REPORT_COLUMNS = tuple(f.name for f in fields(DiagnosticsReport))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def report_csv_row(report: DiagnosticsReport, header: bool = False) -> str:
    """One CSV line (optionally preceded by the header) in ``REPORT_COLUMNS`` order."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(REPORT_COLUMNS)
    d = asdict(report)
    w.writerow([_fmt(d[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()
