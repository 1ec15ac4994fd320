"""Log-log slope estimation for growth rates of irregular series.

Remainder terms and shell counts oscillate wildly, so a plain least-squares
fit of log y against log x underestimates the peaks.  The estimator used
throughout this package takes the maximum of y over dyadic blocks in x and
fits a line through (log2 block-center, log2 block-max).  Smooth series
(norm growth, decay envelopes) also go through the same routine so every
reported exponent has the same meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ExponentFit", "envelope_exponent", "loglog_slope"]


@dataclass(frozen=True)
class ExponentFit:
    """Result of a log-log slope fit.

    slope      fitted power (base-free: ratio of log increments)
    intercept  offset in log2 units
    residual   rms of fit residuals in log2 units
    n_blocks   number of dyadic blocks used (or raw points for loglog_slope)
    skipped    number of dyadic blocks dropped because their max was <= 0
    """

    slope: float
    intercept: float
    residual: float
    n_blocks: int
    skipped: int

    def predict(self, x: float) -> float:
        return 2.0 ** (self.intercept + self.slope * np.log2(x))


def _fit_line(lx: np.ndarray, ly: np.ndarray, skipped: int) -> ExponentFit:
    # Pairwise-difference form of least squares.  Adding a constant to every
    # ly cancels exactly in ly[j] - ly[i], so scaling y by a power of two
    # leaves the slope bit-for-bit unchanged.
    dx = lx[:, None] - lx[None, :]
    dy = ly[:, None] - ly[None, :]
    denom = float(np.sum(dx * dx))
    if denom == 0.0:
        raise ValueError("all block centers coincide; cannot fit a slope")
    slope = float(np.sum(dx * dy) / denom)
    intercept = float(np.mean(ly) - slope * np.mean(lx))
    resid = ly - (intercept + slope * lx)
    rms = float(np.sqrt(np.mean(resid * resid)))
    return ExponentFit(slope, intercept, rms, len(lx), skipped)


def envelope_exponent(
    x,
    y,
    min_blocks: int = 4,
    block_base: float = 2.0,
) -> ExponentFit:
    """Fit the growth exponent of the upper envelope of y against x.

    Blocks are [x_hi / b^(j+1), x_hi / b^j) anchored at the largest x, with
    b = block_base.  Within each block the maximum of y is taken; the block
    is represented by the geometric mean of its edges.  Blocks whose maximum
    is <= 0 (no data above zero) are skipped and counted in the report.

    Requires at least min_blocks (default 4) usable blocks.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) == 0:
        raise ValueError("empty series")
    if np.any(x <= 0.0):
        raise ValueError("x values must be positive")
    if block_base <= 1.0:
        raise ValueError("block_base must exceed 1")

    x_hi = float(np.max(x))
    x_lo = float(np.min(x))
    n_blocks = max(1, int(np.ceil(np.log(x_hi / x_lo) / np.log(block_base))))
    if x_lo == x_hi:
        n_blocks = 1

    centers = []
    maxima = []
    skipped = 0
    for j in range(n_blocks):
        hi = x_hi / block_base**j
        lo = x_hi / block_base ** (j + 1)
        if j == n_blocks - 1:
            sel = (x >= lo * (1.0 - 1e-12)) & (x <= hi)
        else:
            sel = (x > lo) & (x <= hi)
        if not np.any(sel):
            continue
        m = float(np.max(y[sel]))
        if m <= 0.0:
            skipped += 1
            continue
        centers.append(np.sqrt(lo * hi))
        maxima.append(m)
    if len(centers) < min_blocks:
        raise ValueError(
            f"only {len(centers)} usable dyadic blocks (need {min_blocks}); "
            f"{skipped} skipped with non-positive maxima"
        )
    lx = np.log2(np.array(centers))
    ly = np.log2(np.array(maxima))
    return _fit_line(lx, ly, skipped)


def loglog_slope(x, y) -> ExponentFit:
    """Plain least-squares slope of log y vs log x (no blocking).

    For smooth series such as norm growth; y must be strictly positive.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need two or more (x, y) pairs")
    if np.any(x <= 0.0) or np.any(y <= 0.0):
        raise ValueError("loglog_slope needs positive x and y")
    return _fit_line(np.log2(x), np.log2(y), 0)
