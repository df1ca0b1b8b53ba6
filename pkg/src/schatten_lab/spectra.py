"""Singular spectra, Schatten-Lorentz functionals, and NWO bound functionals.

Spectra come from dense SVD only; matrices at desk scale stay below ~16k
rows.  Weighted inner products are handled by conjugating with the square
root of the weight first, which is an exact finite-dimensional similarity,
so the plain SVD of the conjugate is the weighted spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import CubeId, GridError
from .haar import SampledFunction
from .operators import OperatorMatrix, conjugate_by_weight
from .spaces import LorentzParams, lorentz_norm

RANK_CUTOFF = 1e-13


@dataclass(frozen=True)
class SingularSpectrum:
    """Nonincreasing singular values s_1 >= s_2 >= ... of one matrix."""

    values: np.ndarray
    source_dim: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or len(v) > self.source_dim:
            raise GridError("spectrum must be a vector no longer than the source dimension")
        if len(v) and (v[0] < 0 or np.any(np.diff(v) > 1e-12 * max(v[0], 1.0))):
            raise GridError("singular values must be nonnegative and nonincreasing")

    @property
    def numerical_rank(self) -> int:
        """Count of values above RANK_CUTOFF times the top value."""
        if len(self.values) == 0 or self.values[0] == 0:
            return 0
        return int(np.sum(self.values > RANK_CUTOFF * self.values[0]))

    def __len__(self) -> int:
        return len(self.values)


def singular_values(T) -> SingularSpectrum:
    """Full singular spectrum of a matrix or OperatorMatrix.

    An OperatorMatrix carrying an inner-product weight is conjugated by the
    weight's square root before the SVD, so the returned values are its
    singular values with respect to the weighted inner product.
    """
    if isinstance(T, OperatorMatrix):
        if T.ip_weight is not None:
            T = conjugate_by_weight(
                OperatorMatrix(T.entries, T.window, meta=T.meta), T.ip_weight
            )
        entries = T.entries
    else:
        entries = np.asarray(T)
    if not np.all(np.isfinite(entries)):
        raise GridError("matrix has non-finite entries")
    vals = np.linalg.svd(entries, compute_uv=False)
    return SingularSpectrum(vals, entries.shape[0])


def _spectrum_values(s) -> np.ndarray:
    if isinstance(s, SingularSpectrum):
        return s.values
    return np.asarray(s, dtype=float)


def _norm_q(q) -> float:
    return math.inf if q in ("inf", np.inf) else float(q)


def schatten_norm(s, p: float, q) -> float:
    """Schatten-Lorentz S^(p,q) norm of a singular value sequence.

    Indexing starts at k = 1, so the weight is (1+k)^(q/p-1); q may be the
    string or float infinity, giving sup_k s_k (1+k)^(1/p).
    """
    return lorentz_norm(_spectrum_values(s), LorentzParams(p, _norm_q(q)))


def weak_argmax(s, p: float) -> int:
    """1-based index attaining sup_k s_k (1+k)^(1/p)."""
    v = _spectrum_values(s)
    if len(v) == 0:
        raise GridError("empty spectrum has no attaining index")
    k = np.arange(1, len(v) + 1)
    return int(np.argmax(np.sort(v)[::-1] * (1.0 + k) ** (1.0 / p))) + 1


def functional_report(s, p: float, q) -> dict:
    """Value plus attaining index, shaped for the JSON export."""
    v = np.sort(_spectrum_values(s))[::-1]
    qf = _norm_q(q)
    value = schatten_norm(v, p, qf)
    k = np.arange(1, len(v) + 1)
    if qf == math.inf:
        arg = weak_argmax(v, p)
    else:
        terms = v**qf * (1.0 + k) ** (qf / p - 1.0)
        arg = int(np.argmax(terms)) + 1 if len(v) else 0
    return {
        "p": p,
        "q": "inf" if qf == math.inf else qf,
        "value": value,
        "argmax_k": arg,
    }


def _as_family(fam) -> list[tuple[CubeId, SampledFunction]]:
    if hasattr(fam, "items"):
        return sorted(fam.items(), key=lambda kv: (kv[0].level, kv[0].offset))
    return list(fam)


def nwo_size_report(fam, r: float) -> dict:
    """Largest ratio of ||e_Q||_r to |Q|^(1/r - 1/2) over the family.

    A family is NWO-sized for exponent r when this constant is O(1); Haar
    functions achieve exactly 1.
    """
    worst = 0.0
    items = _as_family(fam)
    for cube, func in items:
        bound = float(cube.volume) ** (1.0 / r - 0.5)
        worst = max(worst, func.norm_lp(r) / bound)
    return {"r": r, "constant": worst, "count": len(items)}


def rs_lower_functional(T: OperatorMatrix, e, f, p: float) -> float:
    """(sum_Q |<T e_Q, f_Q>|^p)^(1/p) over a cube-indexed pair of families."""
    if p <= 1:
        raise GridError("lower functional needs p > 1")
    e_items = _as_family(e)
    f_map = dict(_as_family(f))
    hv = T.window.cell_volume
    total = 0.0
    for cube, e_func in e_items:
        if cube not in f_map:
            raise GridError(f"families disagree on cube {cube}")
        out = T.entries @ e_func.values.ravel()
        val = np.vdot(f_map[cube].values.ravel(), out) * hv
        total += abs(val) ** p
    return total ** (1.0 / p)


def rs_upper_assembly(terms, p: float, q) -> float:
    """Empirical constant ||sum lam <., e> f||_(S^(p,q)) / ||lam||_(l^(p,q)).

    Each term is (lam, e_Q, f_Q); the rank-one sum is assembled densely with
    the L2 inner product of the sample grid.
    """
    if not terms:
        raise GridError("upper assembly needs at least one term")
    win = terms[0][1].window
    hv = win.cell_volume
    m = win.samples_per_side**win.n
    mat = np.zeros((m, m), dtype=complex)
    lams = []
    for lam, e_func, f_func in terms:
        mat += lam * np.multiply.outer(f_func.values.ravel(), e_func.values.ravel().conj()) * hv
        lams.append(abs(lam))
    if np.allclose(mat.imag, 0.0):
        mat = mat.real
    s = singular_values(mat)
    return schatten_norm(s, p, q) / lorentz_norm(lams, LorentzParams(p, _norm_q(q)))


def spectrum_csv_rows(s: SingularSpectrum) -> list[list[str]]:
    rows = [["k", "s_k"]]
    for k, val in enumerate(s.values, start=1):
        rows.append([str(k), format(float(val), ".17g")])
    return rows
