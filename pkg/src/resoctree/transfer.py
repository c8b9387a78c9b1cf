"""Piecewise-linear RGBA transfer functions and value-interval culling queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INF = float("inf")


class TransferFunctionError(ValueError):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Ordered (scalar, RGBA) control points; scalars in [0,255], RGBA in [0,1].

    Evaluation is piecewise-linear between points; everything outside the
    first/last control point is fully transparent.
    """
    points: tuple[tuple[float, tuple[float, float, float, float]], ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise TransferFunctionError("need at least 2 control points")
        prev = -INF
        for x, rgba in self.points:
            if not 0.0 <= x <= 255.0:
                raise TransferFunctionError(f"control scalar {x} outside [0,255]")
            if x <= prev:
                raise TransferFunctionError("control scalars must strictly increase")
            if len(rgba) != 4 or any(not 0.0 <= v <= 1.0 for v in rgba):
                raise TransferFunctionError(f"RGBA {rgba} outside [0,1]")
            prev = x

    def evaluate(self, scalar: float) -> tuple[float, float, float, float]:
        pts = self.points
        if scalar < pts[0][0] or scalar > pts[-1][0]:
            return (0.0, 0.0, 0.0, 0.0)
        for i in range(len(pts) - 1):
            x0, c0 = pts[i]
            x1, c1 = pts[i + 1]
            if x0 <= scalar <= x1:
                t = 0.0 if x1 == x0 else (scalar - x0) / (x1 - x0)
                return tuple(c0[j] + (c1[j] - c0[j]) * t for j in range(4))
        return (0.0, 0.0, 0.0, 0.0)

    def opacity(self, scalar: float) -> float:
        return self.evaluate(scalar)[3]

    def interval_max_opacity(self, lo: float, hi: float) -> float:
        """Max opacity over [lo, hi]; exact for the piecewise-linear shape."""
        if hi < lo:
            lo, hi = hi, lo
        best = max(self.opacity(lo), self.opacity(hi))
        for x, rgba in self.points:
            if lo < x < hi:
                best = max(best, rgba[3])
        return best

    def support_intervals(self) -> list[tuple[float, float, bool]]:
        """Maximal intervals where opacity > 0, as (start, end, end_closed).

        Starts are infima (possibly not attained); an end is open when the
        opacity decays linearly to exactly zero at that point.
        """
        out: list[list] = []
        pts = self.points
        for i in range(len(pts) - 1):
            (x0, c0), (x1, c1) = pts[i], pts[i + 1]
            if c0[3] > 0.0 or c1[3] > 0.0:
                end_closed = c1[3] > 0.0
                if out and x0 <= out[-1][1]:
                    out[-1][1] = x1
                    out[-1][2] = end_closed
                else:
                    out.append([x0, x1, end_closed])
        return [tuple(iv) for iv in out]

    def first_support_at_or_after(self, a: float) -> float:
        """Infimum of {x >= a : opacity(x) > 0}, or +inf."""
        if self.opacity(a) > 0.0:
            return a
        best = INF
        for s, e, end_closed in self.support_intervals():
            if e > a or (e == a and end_closed):
                best = min(best, max(s, a))
        return best

    def interval_is_empty(self, lo: int, hi: int) -> bool:
        """True iff opacity is identically zero on [lo, hi]."""
        f = self.first_support_at_or_after(float(lo))
        if f > hi:
            return True
        return f == hi and self.opacity(float(hi)) == 0.0

    # -- kernel-facing tables ----------------------------------------------

    def packed_points(self, max_points: int) -> tuple[np.ndarray, np.ndarray, int]:
        n = len(self.points)
        if n > max_points:
            raise TransferFunctionError(f"too many control points (> {max_points})")
        xs = np.zeros(max_points, dtype=np.float64)
        rgba = np.zeros((max_points, 4), dtype=np.float64)
        for i, (x, c) in enumerate(self.points):
            xs[i] = x
            rgba[i] = c
        return xs, rgba, n

    def support_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(first-support-at-or-after, opacity) sampled at integer scalars."""
        f = np.empty(256, dtype=np.float64)
        op = np.empty(256, dtype=np.float64)
        for v in range(256):
            f[v] = self.first_support_at_or_after(float(v))
            op[v] = self.opacity(float(v))
        f[~np.isfinite(f)] = 1e30
        return f, op


def transparent_tf() -> TransferFunction:
    return TransferFunction(points=((0.0, (0, 0, 0, 0)), (255.0, (0, 0, 0, 0))))


def grayscale_ramp_tf(threshold: float = 0.0, max_alpha: float = 1.0
                      ) -> TransferFunction:
    """Opacity ramps linearly from `threshold` up to 255."""
    pts = []
    if threshold > 0.0:
        pts.append((0.0, (0.0, 0.0, 0.0, 0.0)))
        pts.append((threshold, (0.0, 0.0, 0.0, 0.0)))
    else:
        pts.append((0.0, (0.0, 0.0, 0.0, 0.0)))
    pts.append((255.0, (1.0, 1.0, 1.0, max_alpha)))
    return TransferFunction(points=tuple(pts))
