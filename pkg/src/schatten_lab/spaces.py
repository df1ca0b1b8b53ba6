"""Function-space norms: Besov (continuous, dyadic, weighted), Sobolev,
oscillation sequences over cubes, and Lorentz sequence norms.

Cube volumes inside norm formulas mean the sampled volume of the in-window
part, which equals |Q| for interior cubes; this keeps weighted and unweighted
dyadic sums exactly equal at w = 1 even on boundary-clipped shifted cubes.

The Lorentz norm follows the convention with rearrangement index starting at
k = 1 and weight (1+k)^(q/p-1), so the p = q case collapses to plain ell^p
with no spurious constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import (
    CubeId,
    GridError,
    GridWindow,
    Shift,
    all_shifts,
    cube_id_to_str,
    enumerate_cubes,
    sample_count,
    sample_slices,
)
from .haar import SampledFunction, cube_average, haar_transform, mean_oscillation
from .weights import Weight, _box_slices, weighted_measure

__all__ = [
    "CubeSequence",
    "LorentzParams",
    "besov_continuous",
    "besov_dyadic",
    "besov_dyadic_weighted",
    "sobolev_seminorm",
    "oscillation",
    "dilate_clip_fraction",
    "mean_oscillation",
    "oscillation_sequence",
    "mean_oscillation_sequence",
    "lorentz_norm",
    "cube_sequence_csv_rows",
]


@dataclass
class CubeSequence:
    """Nonnegative reals indexed by window cubes."""

    entries: dict[CubeId, float]
    label: str = "custom"  # "besov-term" | "osc" | "mean-osc" | "custom"

    def __post_init__(self) -> None:
        for q, v in self.entries.items():
            if v < 0:
                raise GridError(f"negative entry {v} at {cube_id_to_str(q)}")

    def values_sorted(self) -> np.ndarray:
        return np.sort(np.array(list(self.entries.values())))[::-1]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class LorentzParams:
    p: float
    q: float

    def __post_init__(self) -> None:
        if not (0 < self.p < math.inf):
            raise GridError("Lorentz p must be finite and positive")
        if not self.q > 0:
            raise GridError("Lorentz q must be positive")


def besov_continuous(b: SampledFunction, p: float, tile: int = 1024) -> float:
    """Double Riemann sum of |b(x)-b(y)|^p / |x-y|^(2n) off the diagonal.

    Pairs closer than one cell width are excluded; their contribution for
    smooth b vanishes under refinement.  The sum is tiled to bound memory.
    """
    if p <= 0:
        raise GridError("Besov exponent must be positive")
    win = b.window
    n = win.n
    pts = np.stack(
        [g.ravel() for g in np.meshgrid(*win.axes(), indexing="ij")], axis=1
    )
    vals = b.values.ravel()
    m = len(vals)
    h = win.h
    total = 0.0
    for start in range(0, m, tile):
        stop = min(start + tile, m)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        dist2 = np.einsum("ijk,ijk->ij", diff, diff)
        mask = dist2 >= h * h * (1 - 1e-12)
        num = np.abs(vals[start:stop, None] - vals[None, :]) ** p
        with np.errstate(divide="ignore", invalid="ignore"):
            contrib = np.where(mask, num / dist2**n, 0.0)
        total += float(contrib.sum())
    return (total * win.cell_volume**2) ** (1.0 / p)


def _dyadic_terms(
    b: SampledFunction, shift: Shift, win: GridWindow
) -> list[tuple[CubeId, float, float]]:
    """(cube, |coefficient|, sampled volume) over cancellative indices."""
    coeffs = haar_transform(b, shift)
    vols: dict[CubeId, float] = {}
    out = []
    for idx, val in coeffs.data.items():
        q = idx.cube
        if q not in vols:
            vols[q] = sample_count(win, q) * win.cell_volume
        if vols[q] > 0:
            out.append((q, abs(val), vols[q]))
    return out


def besov_dyadic(
    b: SampledFunction, p: float, shift: Shift | None = None, win: GridWindow | None = None
) -> float:
    """(sum over cancellative indices of (|<b,h>| |Q|^(-1/2))^p)^(1/p)."""
    if p <= 0:
        raise GridError("Besov exponent must be positive")
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    total = sum((c / math.sqrt(v)) ** p for _, c, v in _dyadic_terms(b, shift, win))
    return total ** (1.0 / p)


def besov_dyadic_weighted(
    b: SampledFunction,
    w: Weight,
    p: float,
    shift: Shift | None = None,
    win: GridWindow | None = None,
) -> float:
    """Weighted variant: terms |<b,h>| |Q|^(1/2) / (w(Q) w^(-1)(Q))^(1/2)."""
    if p <= 0:
        raise GridError("Besov exponent must be positive")
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    winv = w.inverse()
    total = 0.0
    for q, c, v in _dyadic_terms(b, shift, win):
        denom = math.sqrt(weighted_measure(w, q) * weighted_measure(winv, q))
        total += (c * math.sqrt(v) / denom) ** p
    return total ** (1.0 / p)


def sobolev_seminorm(
    b: SampledFunction, p_exponent: int | None = None, spectral: bool = False
) -> float:
    """(sum ||grad b||_2^p h^n)^(1/p), defaulting p to the dimension.

    Centered differences with one-sided stencils at the boundary; spectral=True
    switches to the FFT derivative, appropriate for periodic samples.
    """
    win = b.window
    n = win.n
    p = n if p_exponent is None else p_exponent
    if spectral:
        grads = []
        freqs = 2j * math.pi * np.fft.fftfreq(win.samples_per_side, d=win.h)
        fhat = np.fft.fftn(b.values)
        for axis in range(n):
            shape = [1] * n
            shape[axis] = win.samples_per_side
            grads.append(np.real(np.fft.ifftn(fhat * freqs.reshape(shape))))
    else:
        grads = np.gradient(b.values, win.h) if n > 1 else [np.gradient(b.values, win.h)]
    mag = np.sqrt(sum(g**2 for g in grads))
    return float((mag**p).sum() * win.cell_volume) ** (1.0 / p)


def dilate_clip_fraction(win: GridWindow, q: CubeId, K: float) -> float:
    """Sampled fraction of the dilate KQ that lies inside the window."""
    c = q.center_exact()
    half = Fraction(K) * q.side / 2
    sl = _box_slices(win, tuple(x - half for x in c), tuple(x + half for x in c))
    if sl is None:
        return 0.0
    count = 1
    for s in sl:
        count *= s.stop - s.start
    full = float((Fraction(K) * q.side / win.h_exact) ** win.n)
    return count / full


def oscillation(b: SampledFunction, q: CubeId, alpha: float, K: float = 5.0) -> float:
    """[|Q|^(-1) sum over KQ of |b - avg_Q(b)|^alpha h^n]^(1/alpha), KQ clipped."""
    if alpha <= 0 or K < 1:
        raise GridError("need alpha > 0 and K >= 1")
    win = b.window
    avg = cube_average(b, q)
    c = q.center_exact()
    half = Fraction(K) * q.side / 2
    sl = _box_slices(win, tuple(x - half for x in c), tuple(x + half for x in c))
    if sl is None:
        raise GridError("dilate holds no samples")
    vol_q = sample_count(win, q) * win.cell_volume
    total = float((np.abs(b.values[sl] - avg) ** alpha).sum()) * win.cell_volume
    return (total / vol_q) ** (1.0 / alpha)


def oscillation_sequence(
    b: SampledFunction,
    win: GridWindow | None = None,
    shift: Shift | None = None,
    alpha: float | None = None,
    K: float = 5.0,
) -> CubeSequence:
    """osc_alpha(b, Q) over one system's window cubes (alpha defaults to n)."""
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    alpha = alpha if alpha is not None else float(win.n)
    entries = {}
    for q in enumerate_cubes(win, shift):
        if sample_slices(win, q) is None:
            continue
        entries[q] = oscillation(b, q, alpha, K)
    return CubeSequence(entries, label="osc")


def mean_oscillation_sequence(
    b: SampledFunction, win: GridWindow | None = None, shift: Shift | None = None
) -> CubeSequence:
    """M(b, Q) over one system's window cubes."""
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    entries = {}
    for q in enumerate_cubes(win, shift):
        if sample_slices(win, q) is None:
            continue
        entries[q] = mean_oscillation(b, q)
    return CubeSequence(entries, label="mean-osc")


def lorentz_norm(seq, params: LorentzParams) -> float:
    """Lorentz sequence norm with rearrangement index from 1, weight (1+k).

    Accepts a CubeSequence or any iterable of nonnegative reals.
    """
    if isinstance(seq, CubeSequence):
        a = seq.values_sorted()
    else:
        a = np.sort(np.abs(np.asarray(list(seq), dtype=float)))[::-1]
    if len(a) == 0:
        return 0.0
    k = np.arange(1, len(a) + 1)
    p, q = params.p, params.q
    if q == math.inf:
        return float(np.max(a * (1.0 + k) ** (1.0 / p)))
    return float(np.sum(a**q * (1.0 + k) ** (q / p - 1.0)) ** (1.0 / q))


def cube_sequence_csv_rows(seq: CubeSequence) -> list[list[str]]:
    rows = [["cube", "value"]]
    for q in sorted(seq.entries, key=lambda c: (c.level, c.offset, c.shift.thirds)):
        rows.append([cube_id_to_str(q), format(seq.entries[q], ".17g")])
    return rows
