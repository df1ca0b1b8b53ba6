"""Discrete operators on a sample window.

Matrices act on functions through the C-order raveling of the midpoint grid;
the pairing behind adjoints and traces is sum(f conj(g)) h^n, optionally with
a weight.  Riesz transforms come in two modes: the periodic-multiplier mode
(circulant conjugation of the symbol -i xi_j/|xi| by the discrete Fourier
transform, exactly bounded by 1) and the truncated-kernel mode (pointwise
kernel c_n z_j/|z|^(n+1) with zero diagonal), the latter for constructions
that need kernel values, such as the necessity trace.

The dyadic shift, paraproducts, and their remainder operator live on the
standard Haar system of an aligned window.  The shift's cube family stops one
level short of the window's finest so every image function is again a window
index; under that convention the closed-form remainder reproduces the
defining difference of paraproducts exactly, not just asymptotically.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dyadic import (
    CubeId,
    GridError,
    GridWindow,
    Shift,
    WhitneyPair,
    children,
    enumerate_cubes,
    far_cube,
    sample_count,
    sample_slices,
)
from .haar import (
    SampledFunction,
    Signature,
    _axis_factors,
    cancellative_signatures,
    cube_average,
    haar_transform,
)
from .weights import Weight


@dataclass
class OperatorMatrix:
    """Dense square operator in the grid-sample basis (C-order raveling)."""

    entries: np.ndarray
    window: GridWindow
    ip_weight: Weight | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        e = self.entries
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise GridError(f"operator matrix must be square, got {e.shape}")
        m = self.window.samples_per_side**self.window.n
        if e.shape[0] % m != 0:
            raise GridError(f"matrix size {e.shape[0]} not a multiple of grid size {m}")

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def blocks(self) -> int:
        """Spinor blocks per grid point (1 for scalar operators)."""
        m = self.window.samples_per_side**self.window.n
        return self.entries.shape[0] // m

    def apply(self, f: SampledFunction) -> np.ndarray:
        if self.blocks != 1:
            raise GridError("apply expects a scalar operator")
        return (self.entries @ f.values.ravel()).reshape(f.values.shape)


def riesz_constant(n: int) -> float:
    """c_n = Gamma((n+1)/2) / pi^((n+1)/2); 1/pi in 1D, 1/(2 pi) in 2D."""
    return math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)


def riesz_kernel(z: np.ndarray, j: int, n: int) -> np.ndarray:
    """K_j(z) = c_n z_j / |z|^(n+1) for z of shape (..., n)."""
    dist = np.sqrt(np.einsum("...k,...k->...k", z, z).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = riesz_constant(n) * z[..., j - 1] / dist ** (n + 1)
    return np.where(dist == 0, 0.0, out)


def _frequency_grids(win: GridWindow) -> list[np.ndarray]:
    N = win.samples_per_side
    freq = np.fft.fftfreq(N) * N  # integer mode numbers 0..N/2-1, -N/2..-1
    return np.meshgrid(*([freq] * win.n), indexing="ij")


def riesz_symbol(win: GridWindow, j: int) -> np.ndarray:
    """-i xi_j/|xi| on the FFT mode grid, zero at the origin."""
    grids = _frequency_grids(win)
    mag = np.sqrt(sum(g**2 for g in grids))
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = -1j * grids[j - 1] / mag
    sym[tuple([0] * win.n)] = 0.0
    return sym


def _circulant_from_kernel(kern: np.ndarray, win: GridWindow) -> np.ndarray:
    N = win.samples_per_side
    m = N**win.n
    idx = np.arange(N)
    D = (idx[:, None] - idx[None, :]) % N
    if win.n == 1:
        return kern[D]
    if win.n == 2:
        out = np.empty((m, m), dtype=kern.dtype)
        view = out.reshape(N, N, N, N)
        for x0 in range(N):
            row = D[x0]
            view[x0] = kern[row[None, :, None], D[:, None, :]]
        return out
    raise GridError("periodic assembly supports n <= 2")


def riesz_matrix(j: int, win: GridWindow, mode: str = "periodic-multiplier") -> OperatorMatrix:
    """The j-th Riesz transform (Hilbert transform for n = 1)."""
    n = win.n
    if not 1 <= j <= n:
        raise GridError(f"axis j={j} out of range 1..{n}")
    if mode == "periodic-multiplier":
        kern = np.fft.ifftn(riesz_symbol(win, j))
        entries = _circulant_from_kernel(kern, win)
        return OperatorMatrix(entries, win, meta={"mode": mode, "axis": j})
    if mode == "truncated-kernel":
        pts = np.stack(
            [g.ravel() for g in np.meshgrid(*win.axes(), indexing="ij")], axis=1
        )
        m = len(pts)
        entries = np.empty((m, m))
        block = 2048
        for start in range(0, m, block):
            stop = min(start + block, m)
            z = pts[start:stop, None, :] - pts[None, :, :]
            entries[start:stop] = riesz_kernel(z, j, n) * win.cell_volume
        np.fill_diagonal(entries, 0.0)
        return OperatorMatrix(entries, win, meta={"mode": mode, "axis": j})
    raise GridError(f"unknown Riesz mode {mode!r}")


def multiplication_matrix(b: SampledFunction) -> OperatorMatrix:
    return OperatorMatrix(np.diag(b.values.ravel()), b.window, meta={"mode": "mult"})


def commutator(b: SampledFunction, T: OperatorMatrix) -> OperatorMatrix:
    """[M_b, T] = M_b T - T M_b."""
    d = b.values.ravel()
    if len(d) != T.size:
        raise GridError("symbol and operator sizes differ")
    entries = d[:, None] * T.entries - T.entries * d[None, :]
    meta = dict(T.meta)
    meta["commutator"] = True
    return OperatorMatrix(entries, T.window, T.ip_weight, meta)


def conjugate_by_weight(T: OperatorMatrix, w: Weight) -> OperatorMatrix:
    """diag(w^(1/2)) T diag(w^(-1/2)).

    Plain singular values of the result equal the singular values of T under
    the w-weighted inner product (finite-dimensional similarity, exact).
    """
    sw = np.sqrt(w.values.ravel())
    if len(sw) != T.size:
        raise GridError("weight and operator sizes differ")
    entries = sw[:, None] * T.entries * (1.0 / sw)[None, :]
    meta = dict(T.meta)
    meta["conjugated"] = w.kind
    return OperatorMatrix(entries, T.window, None, meta)


@dataclass(frozen=True)
class ShiftMap:
    """Cube and signature relabeling behind the dyadic shift operator."""

    cube: Callable[[CubeId], CubeId]
    sig: Callable[[Signature], Signature | None]


def default_shift_map() -> ShiftMap:
    """sigma(Q) = first child in lexicographic offset order; signatures fixed."""
    return ShiftMap(cube=lambda q: children(q)[0], sig=lambda s: s)


def _shift_family(win: GridWindow, sm: ShiftMap, shift: Shift) -> list[CubeId]:
    """Window cubes whose image cube is itself a window index."""
    out = []
    for q in enumerate_cubes(win, shift):
        if sample_slices(win, q) is None:
            continue
        img = sm.cube(q)
        if img.level > win.k_max or sample_slices(win, img) is None:
            continue
        out.append(q)
    return out


def _haar_block(win: GridWindow, q: CubeId, sig: Signature):
    """(slices, dense block) of the Haar function on its in-window support."""
    sl, vecs = _axis_factors(win, q, sig)
    if sl is None:
        return None, None
    block = vecs[0]
    for v in vecs[1:]:
        block = np.multiply.outer(block, v)
    return sl, block


def dyadic_shift(
    win: GridWindow, sm: ShiftMap | None = None, shift: Shift | None = None
) -> OperatorMatrix:
    """Matrix of f -> sum <f, h^eps_Q> h^(sigma eps)_(sigma Q)."""
    sm = sm or default_shift_map()
    shift = shift or Shift.zero(win.n)
    N = win.samples_per_side
    m = N**win.n
    out = np.zeros((m, m))
    view = out.reshape((N,) * win.n * 2)
    hv = win.cell_volume
    for q in _shift_family(win, sm, shift):
        img = sm.cube(q)
        for sig in cancellative_signatures(win.n):
            osig = sm.sig(sig)
            if osig is None:
                continue
            sl_in, blk_in = _haar_block(win, q, sig)
            sl_out, blk_out = _haar_block(win, img, osig)
            if blk_in is None or blk_out is None:
                continue
            view[sl_out + sl_in] += np.multiply.outer(blk_out, blk_in) * hv
    return OperatorMatrix(out, win, meta={"mode": "dyadic-shift"})


def paraproducts(
    b: SampledFunction, win: GridWindow | None = None, shift: Shift | None = None
) -> tuple[OperatorMatrix, OperatorMatrix, OperatorMatrix]:
    """(Pi_b, Pi*_b, Gamma_b) over one system's window cubes.

    Pi_b f = sum <b,h^eps_Q> <f>_Q h^eps_Q, Pi*_b its formal adjoint, and
    Gamma_b the mixed-signature square function term, identically zero in 1D.
    """
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    coeffs = haar_transform(b, shift)
    N = win.samples_per_side
    m = N**win.n
    pi = np.zeros((m, m))
    gamma = np.zeros((m, m))
    pi_v = pi.reshape((N,) * win.n * 2)
    gamma_v = gamma.reshape((N,) * win.n * 2)
    sigs = cancellative_signatures(win.n)
    for q in enumerate_cubes(win, shift):
        sl = sample_slices(win, q)
        if sl is None:
            continue
        count = sample_count(win, q)
        ones = [np.ones(s.stop - s.start) for s in sl]
        avg_vec = ones[0] / count
        for v in ones[1:]:
            avg_vec = np.multiply.outer(avg_vec, v)
        blocks = {}
        for sig in sigs:
            _, blk = _haar_block(win, q, sig)
            blocks[sig] = blk
        for sig in sigs:
            c = coeffs.get(q, sig)
            if c == 0.0:
                continue
            pi_v[sl + sl] += c * np.multiply.outer(blocks[sig], avg_vec)
            for eta in sigs:
                if eta == sig:
                    continue
                gamma_v[sl + sl] += c * np.multiply.outer(
                    blocks[sig] * blocks[eta], blocks[eta]
                ) * win.cell_volume
    meta = {"mode": "paraproduct"}
    gmeta = {"mode": "paraproduct-gamma", "trivial": win.n == 1}
    return (
        OperatorMatrix(pi, win, meta=meta),
        OperatorMatrix(pi.T.copy(), win, meta={"mode": "paraproduct-adjoint"}),
        OperatorMatrix(gamma, win, meta=gmeta),
    )


def remainder_operator(
    b: SampledFunction,
    sm: ShiftMap | None = None,
    win: GridWindow | None = None,
    shift: Shift | None = None,
) -> OperatorMatrix:
    """Closed form of the paraproduct remainder.

    N f = sum over the shift family of <f, h^eps_Q> (avg_(sigma Q) b - avg_Q b)
    h^(sigma eps)_(sigma Q); the scalar factor is the value at sigma(Q) of b's
    detail projection at scale Q, summed over cancellative signatures.
    """
    sm = sm or default_shift_map()
    win = win or b.window
    shift = shift or Shift.zero(win.n)
    N = win.samples_per_side
    m = N**win.n
    out = np.zeros((m, m))
    view = out.reshape((N,) * win.n * 2)
    hv = win.cell_volume
    for q in _shift_family(win, sm, shift):
        img = sm.cube(q)
        factor = cube_average(b, img) - cube_average(b, q)
        if factor == 0.0:
            continue
        for sig in cancellative_signatures(win.n):
            osig = sm.sig(sig)
            if osig is None:
                continue
            sl_in, blk_in = _haar_block(win, q, sig)
            sl_out, blk_out = _haar_block(win, img, osig)
            if blk_in is None or blk_out is None:
                continue
            view[sl_out + sl_in] += factor * np.multiply.outer(blk_out, blk_in) * hv
    return OperatorMatrix(out, win, meta={"mode": "paraproduct-remainder"})


@dataclass
class DecayReport:
    """Shell-binned power-law fit of kernel Fourier coefficients."""

    exponent: float
    shells: np.ndarray  # |l|_inf radius per shell
    shell_means: np.ndarray  # mean |lambda_l| per shell
    residual: float  # rms of the log-log fit


def kernel_fourier_expansion(
    pair: WhitneyPair, j: int, L_max: int = 8, quad_points: int = 16
) -> tuple[np.ndarray, DecayReport]:
    """Fourier coefficients of K_j on the product box of a Whitney pair.

    Tensor midpoint quadrature on quad_points^(2n) nodes; coefficients are
    indexed over l in [-L_max, L_max]^(2n) with axes (x axes..., y axes...).
    The decay report fits mean |lambda_l|, lambda_l = |Q| c_l, per |l|_inf
    shell against (1 + |l|_inf)^(-d).
    """
    q, r = pair.q, pair.r
    if pair.gap == 0:
        raise GridError("pair boxes touch; kernel expansion needs a separated pair")
    n = q.n
    P = quad_points
    side = float(q.side)
    # midpoint nodes in box coordinates u in [0,1)
    u = (np.arange(P) + 0.5) / P
    qlo = [float(v) for v in q.lower_exact()]
    rlo = [float(v) for v in r.lower_exact()]
    x_axes = [qlo[i] + side * u for i in range(n)]
    y_axes = [rlo[i] + side * u for i in range(n)]
    mesh = np.meshgrid(*x_axes, *y_axes, indexing="ij")
    z = np.stack([mesh[i] - mesh[n + i] for i in range(n)], axis=-1)
    kvals = riesz_kernel(z, j, n)
    modes = np.arange(-L_max, L_max + 1)
    phase = np.exp(-2j * np.pi * np.outer(u, modes)) / P  # (P, 2L+1)
    coeffs = kvals.astype(complex)
    for _ in range(2 * n):
        # contract the leading node axis against the phase matrix
        coeffs = np.tensordot(coeffs, phase, axes=([0], [0]))
    lam = np.abs(coeffs) * side**n
    # shell-binned log-log fit
    grids = np.meshgrid(*([np.abs(modes)] * 2 * n), indexing="ij")
    shell_of = np.maximum.reduce(grids)
    shells = np.arange(L_max + 1)
    means = np.array(
        [lam[shell_of == t][lam[shell_of == t] > 0].mean() for t in shells]
    )
    logx = np.log1p(shells)
    logy = np.log(means)
    slope, intercept = np.polyfit(logx, logy, 1)
    fit_res = float(np.sqrt(np.mean((logy - (slope * logx + intercept)) ** 2)))
    report = DecayReport(float(-slope), shells, means, fit_res)
    return coeffs, report


def reconstruct_kernel(coeffs: np.ndarray, n: int, quad_points: int = 16) -> np.ndarray:
    """Evaluate the truncated Fourier series back on the quadrature nodes."""
    P = quad_points
    L = (coeffs.shape[0] - 1) // 2
    u = (np.arange(P) + 0.5) / P
    modes = np.arange(-L, L + 1)
    phase = np.exp(2j * np.pi * np.outer(modes, u))  # (2L+1, P)
    out = coeffs
    for _ in range(2 * n):
        out = np.tensordot(out, phase, axes=([0], [0]))
    return out.real


def lower_median(values: np.ndarray) -> float:
    """The lower median of a sample multiset."""
    flat = np.sort(np.asarray(values).ravel())
    return float(flat[(len(flat) - 1) // 2])


def necessity_test_operator(
    b: SampledFunction, q: CubeId, j: int, w: Weight
) -> tuple[OperatorMatrix, float]:
    """The reciprocal-kernel test operator of the trace lower bound.

    L_Q has kernel eps_Q(x) |Q|^(-2) / K_j(x - y) on Q x Qhat, where Qhat is
    the far cube two side lengths along axis j and eps_Q = sign(b - m) with m
    the lower median of b on Qhat (ties count +1).  Returns L_Q and the trace
    of w^(1/2) [b, R_j] L_Q w^(-1/2) with the truncated-kernel Riesz matrix.
    """
    win = b.window
    qhat = far_cube(win, q, j)
    sl_q = sample_slices(win, q)
    sl_hat = sample_slices(win, qhat)
    if sl_q is None or sl_hat is None:
        raise GridError("cube or far cube holds no samples")
    med = lower_median(b.values[sl_hat])
    N = win.samples_per_side
    m = N**win.n
    grids = np.meshgrid(*win.axes(), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)

    def flat_indices(sl):
        shape = (N,) * win.n
        grid = np.mgrid[sl].reshape(win.n, -1)
        return np.ravel_multi_index(grid, shape)

    iq = flat_indices(sl_q)
    ih = flat_indices(sl_hat)
    eps = np.where(b.values.ravel()[iq] - med >= 0, 1.0, -1.0)
    vol = float(q.volume)
    z = pts[iq][:, None, :] - pts[ih][None, :, :]
    kv = riesz_kernel(z, j, win.n)
    if np.any(kv == 0):
        raise GridError("kernel vanishes on the pair box; cubes too close")
    block = eps[:, None] / (vol**2 * kv) * win.cell_volume
    entries = np.zeros((m, m))
    entries[np.ix_(iq, ih)] = block
    L = OperatorMatrix(entries, win, meta={"mode": "necessity", "axis": j})
    R = riesz_matrix(j, win, mode="truncated-kernel")
    C = commutator(b, R)
    sw = np.sqrt(w.values.ravel())
    trace = float(np.einsum("x,xy,yx,x->", sw, C.entries, L.entries, 1.0 / sw))
    return L, trace


@dataclass
class GammaSet:
    """Self-adjoint anticommuting matrices mixing the Riesz directions."""

    n: int
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.matrices) != self.n:
            raise GridError("need one gamma matrix per dimension")
        d = self.matrices[0].shape[0]
        for g in self.matrices:
            if g.shape != (d, d):
                raise GridError("gamma matrices must share one square shape")
            if np.max(np.abs(g - g.conj().T)) > 1e-14:
                raise GridError("gamma matrices must be self-adjoint")
        eye = np.eye(d)
        for a, ga in enumerate(self.matrices):
            for bb, gb in enumerate(self.matrices):
                anti = ga @ gb + gb @ ga
                want = 2.0 * eye if a == bb else 0.0 * eye
                if np.max(np.abs(anti - want)) > 1e-14:
                    raise GridError("gamma matrices fail the anticommutation relation")

    @property
    def block_size(self) -> int:
        return self.matrices[0].shape[0]


def pauli_gammas(n: int) -> GammaSet:
    """Fixed gamma choice: 1 in 1D, (sigma_x, sigma_y) in 2D, Pauli triple in 3D."""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    if n == 1:
        return GammaSet(1, (np.array([[1.0]], dtype=complex),))
    if n == 2:
        return GammaSet(2, (sx, sy))
    if n == 3:
        return GammaSet(3, (sx, sy, sz))
    raise GridError("gamma matrices provided for n <= 3")


def quantised_derivative(
    f: SampledFunction, win: GridWindow | None = None, gammas: GammaSet | None = None
) -> OperatorMatrix:
    """i [sgn(D), 1 (x) M_f] assembled from periodic-mode Riesz blocks.

    The sign operator of the Dirac operator has self-adjoint scalar blocks
    whose multiplier is xi_j/|xi|, which is i times the Riesz multiplier used
    by riesz_matrix.  Folding that factor into the leading i leaves the sum
    sum_j gamma_j (x) [M_f, R_j], which is Hermitian for real f because each
    [M_f, R_j] is a commutator of a Hermitian with an anti-Hermitian matrix.
    """
    win = win or f.window
    n = win.n
    gammas = gammas or pauli_gammas(n)
    if gammas.n != n:
        raise GridError("gamma set dimension does not match the window")
    m = win.samples_per_side**n
    d = gammas.block_size
    out = np.zeros((d * m, d * m), dtype=complex)
    for j in range(1, n + 1):
        R = riesz_matrix(j, win)
        C = commutator(f, R)
        out += np.kron(gammas.matrices[j - 1], C.entries)
    return OperatorMatrix(out, win, meta={"mode": "quantised-derivative", "blocks": d})


_OPMX_MAGIC = b"OPMX"
_OPMX_CODES = {"f8": 1, "c16": 2}


def write_opmx(path: str, om: OperatorMatrix, sidecar: dict | None = None) -> None:
    """Binary export: 32-byte header then column-major entries; JSON sidecar."""
    e = om.entries
    if np.iscomplexobj(e):
        code, arr = _OPMX_CODES["c16"], e.astype(np.complex128)
    else:
        code, arr = _OPMX_CODES["f8"], e.astype(np.float64)
    header = struct.pack(
        "<4sIIII12x", _OPMX_MAGIC, 1, arr.shape[0], arr.shape[1], code
    )
    assert len(header) == 32
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.asfortranarray(arr).tobytes(order="F"))
    import os

    os.replace(tmp, path)
    side = {
        "rows": arr.shape[0],
        "cols": arr.shape[1],
        "scalar": "c16" if code == 2 else "f8",
        "window": {
            "origin": list(om.window.origin),
            "extent": om.window.extent,
            "levels": list(om.window.levels),
            "samples_per_side": om.window.samples_per_side,
        },
        "meta": om.meta,
    }
    if sidecar:
        side.update(sidecar)
    with open(path + ".json", "w") as fh:
        json.dump(side, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_opmx(path: str) -> np.ndarray:
    """Read back the matrix of an OPMX file."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, version, rows, cols, code = struct.unpack("<4sIIII12x", header)
        if magic != _OPMX_MAGIC or version != 1:
            raise GridError(f"not an OPMX v1 file: {path}")
        dtype = np.complex128 if code == _OPMX_CODES["c16"] else np.float64
        data = np.frombuffer(fh.read(), dtype=dtype)
    return data.reshape((rows, cols), order="F")
