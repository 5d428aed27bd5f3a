"""Gaze stream preprocessing: windowing, denoising, ROI and gaze features."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline


class Source(str, Enum):
    TRACKER = "tracker"
    WEBCAM = "webcam"


class WindowStatus(str, Enum):
    ACCEPTED = "accepted"
    REJECTED_UNSTABLE = "rejected_unstable"
    REJECTED_EMPTY = "rejected_empty"


@dataclass(frozen=True)
class GazeSample:
    """One timestamped 2-D gaze coordinate."""

    t_ms: float
    x: float
    y: float
    source: Source = Source.TRACKER

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite gaze coordinate ({self.x}, {self.y})")
        if self.t_ms < 0:
            raise ValueError(f"negative timestamp {self.t_ms}")


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def intersects(self, other: "BoundingBox") -> bool:
        return not (other.x_min > self.x_max or other.x_max < self.x_min
                    or other.y_min > self.y_max or other.y_max < self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


@dataclass
class GazeWindow:
    """A 1 s core window plus its up-to-3 s extension."""

    index: int
    core_samples: list[GazeSample]
    extended_samples: list[GazeSample]
    status: WindowStatus = WindowStatus.ACCEPTED

    @property
    def n_g(self) -> int:
        return len(self.extended_samples)


# fraction of core samples below which a distant y-cluster is treated as
# blink noise, and the y-range (in line heights) above which a window is
# considered unstable
MINORITY_FRACTION = 0.20
OUTLIER_GAP_LINES = 3.0
INSTABILITY_LINES = 6.0


def segment_windows(stream: Sequence[GazeSample],
                    window_ms: float = 1000.0,
                    origin_ms: float | None = None) -> list[GazeWindow]:
    """Cut a stream into consecutive non-overlapping core windows.

    Each window's extension adds one window length before and after the
    core, clipped at the stream boundaries. A trailing partial window
    yields nothing. Windows are aligned to the first sample unless an
    explicit origin is given.
    """
    if not stream:
        return []
    t0 = stream[0].t_ms if origin_ms is None else origin_ms
    t_end = stream[-1].t_ms
    n_windows = int((t_end - t0) // window_ms)
    times = np.array([s.t_ms for s in stream])
    windows = []
    for i in range(n_windows):
        lo = t0 + i * window_ms
        hi = lo + window_ms
        a, b = np.searchsorted(times, [lo, hi], side="left")
        ea, eb = np.searchsorted(times, [lo - window_ms, hi + window_ms],
                                 side="left")
        windows.append(GazeWindow(index=i, core_samples=list(stream[a:b]),
                                  extended_samples=list(stream[ea:eb])))
    return windows


def reject_or_denoise(window: GazeWindow, line_height: float) -> GazeWindow:
    """Drop blink-like y-outliers; reject windows that are still unstable.

    A minority cluster (< 20% of core samples) farther than 3 line heights
    from the majority in y is removed from both the core and extended sets.
    If the surviving core y-range still exceeds 6 line heights the window
    is rejected as unstable.
    """
    core = list(window.core_samples)
    extended = list(window.extended_samples)
    if not core:
        return replace_window(window, core, extended, WindowStatus.REJECTED_EMPTY)

    gap = OUTLIER_GAP_LINES * line_height
    while core:
        ys = np.array([s.y for s in core])
        med = np.median(ys)
        far = np.abs(ys - med) > gap
        if not (0 < far.sum() < MINORITY_FRACTION * len(core)):
            break
        bad_ids = {id(s) for s, f in zip(core, far) if f}
        # drop the same physical samples from the extension, plus any
        # extension samples equally far from the core locus
        core = [s for s in core if id(s) not in bad_ids]
        extended = [s for s in extended
                    if id(s) not in bad_ids and abs(s.y - med) <= gap]

    if not core:
        return replace_window(window, core, extended, WindowStatus.REJECTED_EMPTY)
    if ys.max() - ys.min() > INSTABILITY_LINES * line_height:
        return replace_window(window, core, extended,
                              WindowStatus.REJECTED_UNSTABLE)
    return replace_window(window, core, extended, WindowStatus.ACCEPTED)


def replace_window(window: GazeWindow, core, extended,
                   status: WindowStatus) -> GazeWindow:
    return GazeWindow(index=window.index, core_samples=core,
                      extended_samples=extended, status=status)


def region_of_interest(window: GazeWindow) -> BoundingBox:
    """Min/max box over the retained core samples of an accepted window."""
    if window.status is not WindowStatus.ACCEPTED:
        raise ValueError(f"no region of interest: window {window.index} "
                         f"is {window.status.value}")
    xs = [s.x for s in window.core_samples]
    ys = [s.y for s in window.core_samples]
    return BoundingBox(min(xs), min(ys), max(xs), max(ys))


def moving_average(samples: Sequence[GazeSample], k: int = 5) -> list[GazeSample]:
    """Centered moving average over x and y; edges use a shrunken window."""
    if k < 1 or k % 2 == 0:
        raise ValueError(f"moving-average length must be odd and >= 1, got {k}")
    if not samples:
        return []
    half = k // 2
    xs = np.array([s.x for s in samples])
    ys = np.array([s.y for s in samples])
    out = []
    n = len(samples)
    for i, s in enumerate(samples):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        out.append(GazeSample(t_ms=s.t_ms, x=float(xs[lo:hi].mean()),
                              y=float(ys[lo:hi].mean()), source=s.source))
    return out


def resample(samples: Sequence[GazeSample],
             target_hz: float = 60.0) -> tuple[list[GazeSample], bool]:
    """Cubic-spline resample onto a uniform grid spanning the stream.

    Returns (resampled, used_spline); streams of fewer than 4 samples fall
    back to linear interpolation and are flagged with used_spline=False.
    """
    if not samples:
        raise ValueError("cannot resample an empty stream")
    t = np.array([s.t_ms for s in samples])
    if np.any(np.diff(t) <= 0):
        raise ValueError("timestamps must be strictly increasing")
    xs = np.array([s.x for s in samples])
    ys = np.array([s.y for s in samples])
    step = 1000.0 / target_hz
    grid = np.arange(t[0], t[-1] + 1e-9, step)
    src = samples[0].source
    if len(samples) >= 4:
        fx, fy = CubicSpline(t, xs), CubicSpline(t, ys)
        out = [GazeSample(float(g), float(fx(g)), float(fy(g)), src)
               for g in grid]
        return out, True
    out = [GazeSample(float(g), float(np.interp(g, t, xs)),
                      float(np.interp(g, t, ys)), src) for g in grid]
    return out, False


def gaze_token_distance(extended: Sequence[GazeSample],
                        box: BoundingBox) -> float:
    """Euclidean distance from the mean gaze point to the box center."""
    if not extended:
        raise ValueError("gaze_token_distance: empty sample list")
    mx = sum(s.x for s in extended) / len(extended)
    my = sum(s.y for s in extended) / len(extended)
    cx, cy = box.center
    return float(np.sqrt((mx - cx) ** 2 + (my - cy) ** 2))


def gaze_duration(extended: Iterable[GazeSample], box: BoundingBox) -> int:
    """Number of samples inside the box (inclusive bounds)."""
    return sum(1 for s in extended if box.contains(s.x, s.y))


def gaze_mae(reference: Sequence[GazeSample],
             noisy: Sequence[GazeSample]) -> tuple[float, float]:
    """Per-axis median absolute error after spline-aligning noisy onto
    the reference timestamps."""
    if not reference or not noisy:
        raise ValueError("gaze_mae: empty stream")
    rt = np.array([s.t_ms for s in reference])
    nt = np.array([s.t_ms for s in noisy])
    lo, hi = max(rt[0], nt[0]), min(rt[-1], nt[-1])
    if lo > hi:
        raise ValueError("gaze_mae: streams do not overlap in time")
    keep = (rt >= lo) & (rt <= hi)
    rt_k = rt[keep]
    rx = np.array([s.x for s in reference])[keep]
    ry = np.array([s.y for s in reference])[keep]
    if len(noisy) >= 4:
        fx = CubicSpline(nt, [s.x for s in noisy])
        fy = CubicSpline(nt, [s.y for s in noisy])
        nx, ny = fx(rt_k), fy(rt_k)
    else:
        nx = np.interp(rt_k, nt, [s.x for s in noisy])
        ny = np.interp(rt_k, nt, [s.y for s in noisy])
    return (float(np.median(np.abs(nx - rx))),
            float(np.median(np.abs(ny - ry))))


# ------------------------------------------------------------------ file IO

def sample_to_json(s: GazeSample) -> dict:
    return {"t_ms": int(round(s.t_ms)), "x": s.x, "y": s.y,
            "src": s.source.value}


def sample_from_json(obj: dict) -> GazeSample:
    return GazeSample(t_ms=float(obj["t_ms"]), x=float(obj["x"]),
                      y=float(obj["y"]), source=Source(obj.get("src", "tracker")))


def write_stream(path, stream: Iterable[GazeSample]) -> None:
    with open(path, "w") as f:
        for s in stream:
            f.write(json.dumps(sample_to_json(s)) + "\n")


def read_stream(path) -> list[GazeSample]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(sample_from_json(json.loads(line)))
    return out
