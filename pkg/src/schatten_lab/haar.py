"""Tensor Haar system on a sampled window.

Per-axis factors on a dyadic interval I: the averaging factor chi_I/sqrt|I|
(bit 1) and the cancellative factor (chi_Ileft - chi_Iright)/sqrt|I| (bit 0,
positive on the left half).  A tensor signature is cancellative when at least
one axis carries the cancellative factor; the all-ones signature is the
normalized indicator and is excluded from coefficient maps.

The discrete inner product is the midpoint Riemann sum <f, g> = sum f g h^n.
On the standard (unshifted) system of an aligned window the sampled Haar
functions are exactly orthonormal in it, and the fast pyramid transform
agrees with direct summation to rounding error.  Shifted-system cubes are
not sample-aligned; their coefficients come from direct summation over the
in-window samples and carry ordinary quadrature error.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dyadic import (
    CubeId,
    GridError,
    GridWindow,
    Shift,
    _ceil_frac,
    children,
    cube_id_to_str,
    enumerate_cubes,
    sample_slices,
)


@dataclass(frozen=True)
class Signature:
    """Tensor signature: one bit per axis, 0 = cancellative factor."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.bits or any(b not in (0, 1) for b in self.bits):
            raise GridError(f"signature bits must be 0/1, got {self.bits!r}")

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def cancellative(self) -> bool:
        return any(b == 0 for b in self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def cancellative_signatures(n: int) -> list[Signature]:
    """The 2^n - 1 cancellative signatures, lexicographic in bits."""
    return [
        Signature(bits)
        for bits in itertools.product((0, 1), repeat=n)
        if any(b == 0 for b in bits)
    ]


@dataclass(frozen=True)
class HaarIndex:
    cube: CubeId
    sig: Signature

    def __post_init__(self) -> None:
        if self.cube.n != self.sig.n:
            raise GridError("cube and signature dimension mismatch")


@dataclass
class SampledFunction:
    """Real or complex samples on the window's midpoint grid."""

    window: GridWindow
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        n, N = self.window.n, self.window.samples_per_side
        if self.values.shape != (N,) * n:
            raise GridError(f"values shape {self.values.shape} != {(N,) * n}")

    @property
    def h(self) -> float:
        return self.window.h

    def inner(self, other: "SampledFunction") -> float:
        """Discrete L2 pairing sum(f g h^n); conjugates self if complex."""
        return complex(np.vdot(self.values, other.values)).real * self.window.cell_volume

    def norm_lp(self, p: float) -> float:
        a = np.abs(self.values)
        if p == math.inf:
            return float(a.max())
        return float((a**p).sum() * self.window.cell_volume) ** (1.0 / p)

    def mean(self) -> float:
        return float(self.values.mean().real)


def sample_function(win: GridWindow, f) -> SampledFunction:
    """Sample a callable f(X1, ..., Xn) on the window's midpoint mesh."""
    grids = np.meshgrid(*win.axes(), indexing="ij")
    return SampledFunction(win, np.asarray(f(*grids), dtype=float))


def _axis_split_index(win: GridWindow, q: CubeId, axis: int, sl: slice) -> int:
    """Index (within the window axis) of the first sample past the cube midpoint."""
    mid = q.lower_exact()[axis] + q.side / 2
    j = _ceil_frac((mid - Fraction(win.origin[axis])) / win.h_exact - Fraction(1, 2))
    return min(max(j, sl.start), sl.stop)


def _axis_factors(win: GridWindow, q: CubeId, sig: Signature):
    """Per-axis factor vectors on the in-window sample slices, or (None, None)."""
    sl = sample_slices(win, q)
    if sl is None:
        return None, None
    scale = 1.0 / math.sqrt(float(q.side))
    vecs = []
    for i in range(win.n):
        m = sl[i].stop - sl[i].start
        v = np.full(m, scale)
        if sig.bits[i] == 0:
            split = _axis_split_index(win, q, i, sl[i]) - sl[i].start
            v[split:] = -scale
        vecs.append(v)
    return sl, vecs


def haar_function(win: GridWindow, q: CubeId, sig: Signature) -> SampledFunction:
    """The sampled tensor Haar function of (q, sig), zero off the window part of q."""
    N = win.samples_per_side
    out = np.zeros((N,) * win.n)
    sl, vecs = _axis_factors(win, q, sig)
    if sl is not None:
        block = vecs[0]
        for v in vecs[1:]:
            block = np.multiply.outer(block, v)
        out[sl] = block
    return SampledFunction(win, out)


def haar_coefficient(b: SampledFunction, q: CubeId, sig: Signature) -> float:
    """<b, h^sig_q> by midpoint quadrature over the in-window samples of q."""
    win = b.window
    sl, vecs = _axis_factors(win, q, sig)
    if sl is None:
        return 0.0
    sub = b.values[sl]
    for v in reversed(vecs[1:]):
        sub = sub @ v
    return float(vecs[0] @ sub) * win.cell_volume


def cube_average(b: SampledFunction, q: CubeId) -> float:
    """avg_q(b) over the sampled part of q (normalizer = sampled volume)."""
    sl = sample_slices(b.window, q)
    if sl is None:
        raise GridError(f"cube {cube_id_to_str(q)} holds no samples")
    return float(b.values[sl].mean().real)


@dataclass
class HaarCoefficients:
    """Coefficient map over one system's window cubes, cancellative signatures only."""

    window: GridWindow
    shift: Shift
    data: dict[HaarIndex, float]
    window_mean: float
    method: str = "direct"  # "pyramid" | "direct"

    def __getitem__(self, key: HaarIndex) -> float:
        return self.data[key]

    def get(self, cube: CubeId, sig: Signature, default: float = 0.0) -> float:
        return self.data.get(HaarIndex(cube, sig), default)

    def magnitudes(self) -> np.ndarray:
        return np.abs(np.array(list(self.data.values())))

    def sorted_items(self) -> list[tuple[HaarIndex, float]]:
        return sorted(
            self.data.items(),
            key=lambda kv: (
                kv[0].cube.level,
                kv[0].cube.offset,
                kv[0].sig.bits,
            ),
        )


def haar_transform(b: SampledFunction, shift: Shift | None = None) -> HaarCoefficients:
    """All cancellative coefficients over the window cubes of one system.

    Standard system on an aligned window runs the O(N^n) averaging pyramid;
    shifted systems (or unaligned windows) fall back to direct summation per
    cube.  The `method` field records which path ran.
    """
    win = b.window
    if shift is None:
        shift = Shift.zero(win.n)
    if shift.is_zero and win.is_aligned:
        return _haar_transform_pyramid(b, shift)
    return _haar_transform_direct(b, shift)


def _haar_transform_direct(b: SampledFunction, shift: Shift) -> HaarCoefficients:
    win = b.window
    sigs = cancellative_signatures(win.n)
    data: dict[HaarIndex, float] = {}
    for q in enumerate_cubes(win, shift):
        for sig in sigs:
            data[HaarIndex(q, sig)] = haar_coefficient(b, q, sig)
    return HaarCoefficients(win, shift, data, b.mean(), method="direct")


def _corner_views(a: np.ndarray, n: int) -> list[np.ndarray]:
    return [
        a[tuple(slice(d, None, 2) for d in delta)]
        for delta in itertools.product((0, 1), repeat=n)
    ]


def _haar_transform_pyramid(b: SampledFunction, shift: Shift) -> HaarCoefficients:
    win = b.window
    n = win.n
    depth = int(math.log2(win.samples_per_side))
    corners = list(itertools.product((0, 1), repeat=n))
    sigs = cancellative_signatures(n)
    sign_table = {
        sig: [
            math.prod(1 - 2 * d if bit == 0 else 1 for d, bit in zip(delta, sig.bits))
            for delta in corners
        ]
        for sig in sigs
    }
    base = _aligned_base_offsets(win)
    # pool samples down to child-cell averages of the deepest coefficient level
    child_level = win.k_max + 1 - win.k_min  # relative to the window cube
    avg = b.values.astype(float)
    for _ in range(depth - child_level):
        views = _corner_views(avg, n)
        avg = sum(views) / 2**n
    data: dict[HaarIndex, float] = {}
    for k in range(win.k_max, win.k_min - 1, -1):
        views = _corner_views(avg, n)
        side = 2.0**-k
        coef_scale = math.sqrt(side**n) / 2**n
        per_sig = {
            sig: coef_scale
            * sum(s * v for s, v in zip(sign_table[sig], views))
            for sig in sigs
        }
        stride = 2 ** (k - win.k_min)
        for idx in np.ndindex(*per_sig[sigs[0]].shape):
            off = tuple(bs * stride + i for bs, i in zip(base, idx))
            q = CubeId(shift, k, off)
            for sig in sigs:
                data[HaarIndex(q, sig)] = float(per_sig[sig][idx])
        avg = sum(views) / 2**n
    return HaarCoefficients(win, shift, data, b.mean(), method="pyramid")


def _aligned_base_offsets(win: GridWindow) -> tuple[int, ...]:
    side = Fraction(1, 2) ** win.k_min
    return tuple(int(Fraction(o) / side) for o in win.origin)


def synthesize(coeffs: HaarCoefficients, include_mean: bool = True) -> SampledFunction:
    """Sum of coefficient * Haar function, plus the window mean term."""
    win = coeffs.window
    N = win.samples_per_side
    out = np.zeros((N,) * win.n)
    if include_mean:
        out += coeffs.window_mean
    for idx, val in coeffs.data.items():
        if val == 0.0:
            continue
        sl, vecs = _axis_factors(win, idx.cube, idx.sig)
        if sl is None:
            continue
        block = vecs[0]
        for v in vecs[1:]:
            block = np.multiply.outer(block, v)
        out[sl] += val * block
    return SampledFunction(win, out)


@dataclass
class LocalExpansion:
    """Haar expansion of (b - avg_Q b) chi_Q over the subcubes of Q."""

    cube: CubeId
    average: float
    coeffs: dict[HaarIndex, float]
    residual_l2: float


def expand_mean_oscillation(b: SampledFunction, q: CubeId) -> LocalExpansion:
    """Expand b - avg_q(b) on q into Haar terms of subcubes down to k_max.

    The residual is the discrete L2 norm over q of what the truncated
    expansion misses; it vanishes (to rounding) when level-k_max cubes hold
    exactly two samples per side, because the expansion then resolves
    individual cells.
    """
    win = b.window
    if q.level > win.k_max:
        raise GridError("cube is below the window's level range")
    sigs = cancellative_signatures(win.n)
    avg = cube_average(b, q)
    coeffs: dict[HaarIndex, float] = {}
    stack = [q]
    while stack:
        r = stack.pop()
        if sample_slices(win, r) is None:
            continue
        for sig in sigs:
            coeffs[HaarIndex(r, sig)] = haar_coefficient(b, r, sig)
        if r.level < win.k_max:
            stack.extend(children(r))
    sl = sample_slices(win, q)
    approx = np.full([s.stop - s.start for s in sl], avg)
    for idx, val in coeffs.items():
        if val == 0.0:
            continue
        rsl, vecs = _axis_factors(win, idx.cube, idx.sig)
        if rsl is None:
            continue
        block = vecs[0]
        for v in vecs[1:]:
            block = np.multiply.outer(block, v)
        inner = tuple(
            slice(r.start - s.start, r.stop - s.start) for r, s in zip(rsl, sl)
        )
        approx[inner] += val * block
    diff = b.values[sl] - approx
    residual = math.sqrt(float((np.abs(diff) ** 2).sum()) * win.cell_volume)
    return LocalExpansion(q, avg, coeffs, residual)


def mean_oscillation(b: SampledFunction, q: CubeId) -> float:
    """Average of |b - avg_q(b)| over the sampled part of q."""
    sl = sample_slices(b.window, q)
    if sl is None:
        raise GridError(f"cube {cube_id_to_str(q)} holds no samples")
    block = b.values[sl]
    return float(np.abs(block - block.mean()).mean())


def nwo_maximal(
    f: SampledFunction, family: list[tuple[CubeId, SampledFunction]]
) -> SampledFunction:
    """Pointwise sup over the family of |<f, e_Q>| / |Q|^(1/2) on Q.

    Points covered by no cube of the family get 0.
    """
    win = f.window
    N = win.samples_per_side
    out = np.zeros((N,) * win.n)
    for q, e in family:
        sl = sample_slices(win, q)
        if sl is None:
            continue
        val = abs(f.inner(e)) / math.sqrt(float(q.volume))
        np.maximum(out[sl], val, out=out[sl])
    return SampledFunction(win, out)


def coefficients_csv_rows(coeffs: HaarCoefficients) -> list[list[str]]:
    """Deterministic rows (header first) for CSV export of a coefficient map."""
    rows = [["cube", "signature", "coefficient"]]
    for idx, val in coeffs.sorted_items():
        rows.append([cube_id_to_str(idx.cube), str(idx.sig), format(val, ".17g")])
    return rows
