"""Muckenhoupt A2 weights on a sample window.

A weight is a strictly positive sampled function together with the tag that
built it.  Cube averages are taken over the sampled part of a cube, and the
A2 supremum runs over the cubes of all 3^n shifted dyadic systems; adjacent
shifted systems approximate arbitrary cubes up to a fixed dilation, which is
all the constants downstream need.

Power weights |x - c|^alpha are regularized by clamping the radius at half a
cell (the distance to the nearest half-sample), which keeps the samples
finite and positive without touching the A2 character at resolvable scales;
the clamp value is recorded on the weight.

Reciprocal samples are stored alongside the weight, and inverse() swaps the
two arrays, so [w]_A2 and [1/w]_A2 come out of identical products and the
definition's symmetry holds exactly in tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import (
    CubeId,
    GridError,
    GridWindow,
    all_shifts,
    enumerate_cubes,
    sample_slices,
)
from .haar import SampledFunction


@dataclass
class Weight:
    """Strictly positive samples plus the parameters that produced them."""

    func: SampledFunction
    kind: str  # "constant" | "power" | "tabulated"
    alpha: float | None = None
    center: tuple[float, ...] | None = None
    clamp_value: float | None = None
    inv_values: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = self.func.values
        if not np.all(v > 0):
            raise GridError("weight samples must be strictly positive")
        if self.inv_values is None:
            self.inv_values = 1.0 / v

    @property
    def window(self) -> GridWindow:
        return self.func.window

    @property
    def values(self) -> np.ndarray:
        return self.func.values

    def inverse(self) -> "Weight":
        """The reciprocal weight; shares arrays so the A2 symmetry is exact."""
        alpha = None if self.alpha is None else -self.alpha
        clamp = None if self.clamp_value is None else 1.0 / self.clamp_value
        return Weight(
            SampledFunction(self.window, self.inv_values),
            self.kind,
            alpha,
            self.center,
            clamp,
            inv_values=self.values,
        )


def constant_weight(win: GridWindow, value: float = 1.0) -> Weight:
    if value <= 0:
        raise GridError("constant weight must be positive")
    N = win.samples_per_side
    return Weight(SampledFunction(win, np.full((N,) * win.n, float(value))), "constant")


def power_weight(win: GridWindow, alpha: float, center: tuple[float, ...]) -> Weight:
    """w(x) = max(|x - c|, h/2)^alpha, Euclidean distance, alpha in (-n, n)."""
    n = win.n
    if not -n < alpha < n:
        raise GridError(f"power weight exponent {alpha} outside (-{n}, {n})")
    if len(center) != n:
        raise GridError("center dimension mismatch")
    grids = np.meshgrid(*win.axes(), indexing="ij")
    r2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    r = np.maximum(np.sqrt(r2), win.h / 2)
    clamp = (win.h / 2) ** alpha
    return Weight(
        SampledFunction(win, r**alpha), "power", alpha, tuple(center), clamp
    )


def tabulated_weight(win: GridWindow, values: np.ndarray) -> Weight:
    return Weight(SampledFunction(win, np.asarray(values, dtype=float)), "tabulated")


def weight_from_spec(win: GridWindow, spec: dict) -> Weight:
    """Build a weight from a config mapping: kind plus kind-specific fields."""
    kind = spec.get("kind")
    if kind == "constant":
        return constant_weight(win, float(spec.get("value", 1.0)))
    if kind == "power":
        center = tuple(float(c) for c in spec["center"])
        return power_weight(win, float(spec["alpha"]), center)
    raise GridError(f"unknown weight kind {kind!r}")


def _all_cube_slices(win: GridWindow) -> list[tuple[CubeId, tuple[slice, ...]]]:
    out = []
    for shift in all_shifts(win.n):
        for q in enumerate_cubes(win, shift):
            sl = sample_slices(win, q)
            if sl is not None:
                out.append((q, sl))
    return out


def a2_constant(w: Weight, win: GridWindow | None = None) -> float:
    """sup over all systems' window cubes of avg(w) * avg(1/w); always >= 1."""
    if win is None:
        win = w.window
    v, inv = w.values, w.inv_values
    best = 1.0
    for _, sl in _all_cube_slices(win):
        prod = float(v[sl].mean()) * float(inv[sl].mean())
        if prod > best:
            best = prod
    return best


def weighted_measure(w: Weight, q: CubeId) -> float:
    """w(Q) = sum of in-window samples times h^n, additive over children.

    Cubes above the window's finest level are summed through their children,
    so w(Q) equals the sum of the children's measures exactly, not merely up
    to rounding.
    """
    win = w.window
    sl = sample_slices(win, q)
    if sl is None:
        return 0.0
    if q.level >= win.k_max:
        return float(w.values[sl].sum()) * win.cell_volume
    from .dyadic import children

    return sum(weighted_measure(w, c) for c in children(q))


def reverse_holder_index(
    w: Weight,
    win: GridWindow | None = None,
    candidates: list[float] | None = None,
    cap: float = 4.0,
) -> tuple[float, float]:
    """Largest ladder exponent whose reverse Holder constant stays under cap.

    Returns (sigma, constant) where constant = sup over all systems' cubes of
    [avg(w^(1+sigma))]^(1/(1+sigma)) / avg(w).  (0.0, 1.0) means no candidate
    passed, which does not occur for the weights this package builds.
    """
    if win is None:
        win = w.window
    if candidates is None:
        candidates = [2.0**-k for k in range(6, -1, -1)]
    cubes = _all_cube_slices(win)
    v = w.values
    best = (0.0, 1.0)
    for sigma in sorted(candidates):
        vp = v ** (1.0 + sigma)
        c = 1.0
        for _, sl in cubes:
            ratio = float(vp[sl].mean()) ** (1.0 / (1.0 + sigma)) / float(v[sl].mean())
            if ratio > c:
                c = ratio
        if c <= cap:
            best = (sigma, c)
    return best


def _box_slices(win: GridWindow, lo, hi) -> tuple[slice, ...] | None:
    """Index slices of samples in the box prod [lo_i, hi_i); None if empty."""
    from .dyadic import _ceil_frac

    h = win.h_exact
    origin = win.origin_exact()
    N = win.samples_per_side
    out = []
    for i in range(win.n):
        a = _ceil_frac((lo[i] - origin[i]) / h - Fraction(1, 2))
        b = _ceil_frac((hi[i] - origin[i]) / h - Fraction(1, 2))
        a, b = max(a, 0), min(b, N)
        if a >= b:
            return None
        out.append(slice(a, b))
    return tuple(out)


def doubling_ratio(w: Weight, lam: float, win: GridWindow | None = None) -> float:
    """max over window cubes with lam*Q inside the window of w(lam Q)/(lam^2n w(Q))."""
    if lam < 1:
        raise GridError("dilation factor must be >= 1")
    if win is None:
        win = w.window
    lam_f = Fraction(lam)
    dom_lo = win.origin_exact()
    dom_hi = win.domain_upper_exact()
    denom_scale = float(lam) ** (2 * win.n)
    best = 0.0
    for q, sl in _all_cube_slices(win):
        c = q.center_exact()
        half = lam_f * q.side / 2
        lo = tuple(ci - half for ci in c)
        hi = tuple(ci + half for ci in c)
        if any(l < dl or h > dh for l, dl, h, dh in zip(lo, dom_lo, hi, dom_hi)):
            continue
        big = _box_slices(win, lo, hi)
        if big is None:
            continue
        num = float(w.values[big].sum())
        den = float(w.values[sl].sum()) * denom_scale
        if num / den > best:
            best = num / den
    return best
