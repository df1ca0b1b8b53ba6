"""Experiment harness sweeping symbols, weights and resolutions.

Each experiment exercises one of the equivalences between commutator spectra
and smoothness norms and reports empirical ratios plus a summary.  Runs are
deterministic given the config: same seed, same rows, byte for byte.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dyadic import (
    GridError,
    GridWindow,
    Shift,
    all_shifts,
    enumerate_cubes,
    far_cube,
    sample_count,
    sample_slices,
    unit_window,
)
from .haar import SampledFunction, cancellative_signatures, cube_average, haar_transform
from .operators import (
    commutator,
    conjugate_by_weight,
    lower_median,
    quantised_derivative,
    riesz_matrix,
)
from .spaces import (
    LorentzParams,
    besov_continuous,
    besov_dyadic,
    besov_dyadic_weighted,
    lorentz_norm,
    oscillation_sequence,
    sobolev_seminorm,
)
from .spectra import SingularSpectrum, schatten_norm, singular_values
from .symbols import SymbolSpec, default_family, symbol_library
from .weights import Weight, weight_from_spec, weighted_measure

THREADS_ENV = "SCHATTEN_LAB_THREADS"
DEGENERATE_TOL = 1e-12
WEAK_BAND_LIMIT = 3.0

EXPERIMENT_IDS = (
    "theorem11-upper",
    "median-lower",
    "collapse",
    "theorem12-critical",
    "quantised",
    "besov-equivalence",
)

_MODES = ("periodic-multiplier", "truncated-kernel")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int
    grid_sizes: tuple[int, ...]
    p: float
    q: float
    weight: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    symbols: tuple[SymbolSpec, ...] = ()
    shifts: tuple[Shift, ...] | None = None
    seed: int = 0
    j: int = 1
    mode: str = "periodic-multiplier"
    margin: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_IDS:
            raise GridError(f"unknown experiment {self.experiment!r}")
        if self.n not in (1, 2, 3):
            raise GridError("dimension must be 1, 2 or 3")
        if not self.grid_sizes:
            raise GridError("need at least one grid size")
        for N in self.grid_sizes:
            if N < 2 or N & (N - 1):
                raise GridError(f"grid size {N} is not a power of two")
            if N < 2 ** (self.margin + 1):
                raise GridError(f"grid size {N} too small for margin {self.margin}")
        if any(b >= a for a, b in zip(self.grid_sizes[1:], self.grid_sizes)):
            raise GridError("grid sizes must be strictly ascending")
        if self.p <= 0:
            raise GridError("p must be positive")
        if not self.q > 0:
            raise GridError("q must be positive or infinite")
        if not self.symbols:
            object.__setattr__(self, "symbols", default_family(self.n))
        if not 1 <= self.j <= self.n:
            raise GridError(f"axis j={self.j} out of range 1..{self.n}")
        if self.mode not in _MODES:
            raise GridError(f"unknown Riesz mode {self.mode!r}")
        if self.margin < 1:
            raise GridError("margin must keep at least two samples per cube side")
        if self.shifts is not None:
            for s in self.shifts:
                if len(s.thirds) != self.n:
                    raise GridError("shift dimension does not match n")


@dataclass(frozen=True)
class RatioReport:
    experiment: str
    rows: tuple[dict, ...]
    summary: dict

    def __post_init__(self):
        spread = self.summary.get("spread")
        if spread is not None and math.isfinite(spread) and spread < 1 - 1e-9:
            raise GridError("spread is max/min and cannot be below 1")


def window_for(cfg: ExperimentConfig, N: int) -> GridWindow:
    """Standard window at resolution N, keeping 2^margin samples per finest cube."""
    k_max = N.bit_length() - 1 - cfg.margin
    return unit_window(cfg.n, N, k_max)


def config_key(cfg: ExperimentConfig) -> str:
    """Canonical sort key; schedule-independent report ordering hangs off it."""
    blob = {
        "experiment": cfg.experiment,
        "n": cfg.n,
        "grid_sizes": list(cfg.grid_sizes),
        "p": cfg.p,
        "q": "inf" if math.isinf(cfg.q) else cfg.q,
        "weight": cfg.weight,
        "symbols": [s.key() for s in cfg.symbols],
        "shifts": None if cfg.shifts is None else [list(s.thirds) for s in cfg.shifts],
        "seed": cfg.seed,
        "j": cfg.j,
        "mode": cfg.mode,
        "margin": cfg.margin,
    }
    return json.dumps(blob, sort_keys=True)


def config_from_mapping(d: dict) -> ExperimentConfig:
    """Build a config from a parsed mapping (TOML section or JSON object)."""
    try:
        experiment = d["experiment"]
        n = int(d["n"])
        grid_sizes = tuple(int(v) for v in d["grid_sizes"])
    except KeyError as missing:
        raise GridError(f"config is missing {missing.args[0]!r}") from None
    q_raw = d.get("q", "inf")
    q = math.inf if q_raw in ("inf", math.inf) else float(q_raw)
    syms = d.get("symbols", "default")
    if syms == "default":
        symbols: tuple[SymbolSpec, ...] = ()
    else:
        symbols = tuple(
            SymbolSpec(s["kind"], dict(s.get("params", {})), int(s.get("seed", 0)))
            for s in syms
        )
    shifts_raw = d.get("shifts")
    shifts = (
        None
        if shifts_raw is None
        else tuple(Shift(tuple(int(t) for t in row)) for row in shifts_raw)
    )
    default_margin = 2 if experiment == "collapse" else 1
    return ExperimentConfig(
        experiment=experiment,
        n=n,
        grid_sizes=grid_sizes,
        p=float(d.get("p", 2 * n)),
        q=q,
        weight=dict(d.get("weight", {"kind": "constant", "value": 1.0})),
        symbols=symbols,
        shifts=shifts,
        seed=int(d.get("seed", 0)),
        j=int(d.get("j", 1)),
        mode=d.get("mode", "periodic-multiplier"),
        margin=int(d.get("margin", default_margin)),
        output=d.get("output"),
    )


# Spectra are the expensive part of every sweep; one process-wide cache keyed
# by (symbol, weight, geometry, axis, mode) lets experiments share them.
_SPECTRUM_CACHE: dict[tuple, SingularSpectrum] = {}


def clear_spectrum_cache() -> None:
    _SPECTRUM_CACHE.clear()


def _weight_key(weight_spec: dict) -> str:
    return json.dumps(weight_spec, sort_keys=True)


def conjugated_commutator_spectrum(
    b: SampledFunction, w: Weight, j: int, mode: str, cache_key: tuple | None = None
) -> SingularSpectrum:
    """Singular values of w^(1/2) [M_b, R_j] w^(-1/2), optionally cached."""
    if cache_key is not None and cache_key in _SPECTRUM_CACHE:
        return _SPECTRUM_CACHE[cache_key]
    R = riesz_matrix(j, b.window, mode=mode)
    s = singular_values(conjugate_by_weight(commutator(b, R), w))
    if cache_key is not None:
        _SPECTRUM_CACHE[cache_key] = s
    return s


def _spectrum_for(cfg, spec, b, w, win, mode=None):
    mode = mode or cfg.mode
    key = (spec.key(), _weight_key(cfg.weight), cfg.n, win.samples_per_side, win.k_max, cfg.j, mode)
    return conjugated_commutator_spectrum(b, w, cfg.j, mode, cache_key=key)


def _scale(b: SampledFunction) -> float:
    return max(1.0, float(np.abs(b.values).max()))


def _summarize(ratios) -> dict:
    vals = [r for r in ratios if r is not None and np.isfinite(r) and r > 0]
    if not vals:
        return {"min_ratio": 0.0, "max_ratio": 0.0, "spread": 1.0, "count": 0}
    lo, hi = min(vals), max(vals)
    return {"min_ratio": lo, "max_ratio": hi, "spread": hi / lo, "count": len(vals)}


def _symbol_label(i: int, spec: SymbolSpec) -> str:
    return f"{i}:{spec.kind}"


def exp_theorem11_upper(cfg: ExperimentConfig) -> RatioReport:
    """Schatten p-norm of the conjugated commutator against the Besov norm.

    Rows outside the equivalence's range (p > n, n > 1) still run but the
    summary carries an exploratory flag.
    """
    rows = []
    for i, spec in enumerate(cfg.symbols):
        for N in cfg.grid_sizes:
            win = window_for(cfg, N)
            b = symbol_library(spec, win)
            w = weight_from_spec(win, cfg.weight)
            bc = besov_continuous(b, cfg.p)
            sch = schatten_norm(_spectrum_for(cfg, spec, b, w, win), cfg.p, cfg.p)
            tol = DEGENERATE_TOL * _scale(b)
            degenerate = bc <= tol and sch <= tol
            rows.append(
                {
                    "symbol": _symbol_label(i, spec),
                    "resolution": N,
                    "schatten": sch,
                    "besov_continuous": bc,
                    "ratio": None if degenerate else sch / bc,
                    "degenerate": degenerate,
                }
            )
    summary = _summarize(r["ratio"] for r in rows)
    summary["exploratory"] = not (cfg.p > cfg.n and cfg.n > 1)
    return RatioReport(cfg.experiment, tuple(rows), summary)


@dataclass(frozen=True)
class MedianFamilies:
    """Sign-set test families of the median construction, indexed by cube."""

    g1: dict
    h1: dict
    g2: dict
    h2: dict
    max_fraction: float
    cube_count: int

    def cubes(self):
        return sorted(self.g1, key=lambda q: (q.level, q.offset))


def median_families(b: SampledFunction, w: Weight, j: int) -> MedianFamilies:
    """Build G^s (far cube) and H^s (cube) families from the median split.

    For each window cube with an in-window far cube along axis j, the lower
    median m of b on the far cube splits the cube into E1 = {b < m} and
    E2 = {b > m}; the far cube carries F1 = {b >= m} and F2 = {b <= m}.
    The H side is normalized by the inverse-weight measure of the cube, the
    G side by the weight measure of the far cube.

    max_fraction is the median property itself: the largest one-sided
    fraction {b < m} or {b > m} on the far cube where m is computed, never
    above one half.  The E sets on the near cube carry no such bound.
    """
    win = b.window
    winv = w.inverse()
    shape = b.values.shape
    g1, h1, g2, h2 = {}, {}, {}, {}
    worst = 0.0
    for q in enumerate_cubes(win, Shift.zero(win.n)):
        try:
            qhat = far_cube(win, q, j)
        except GridError:
            continue
        sl_q = sample_slices(win, q)
        sl_h = sample_slices(win, qhat)
        if sl_q is None or sl_h is None:
            continue
        m = lower_median(b.values[sl_h])
        below = b.values[sl_q] < m
        above = b.values[sl_q] > m
        far_below = int((b.values[sl_h] < m).sum())
        far_above = int((b.values[sl_h] > m).sum())
        worst = max(worst, max(far_below, far_above) / b.values[sl_h].size)
        wg = math.sqrt(weighted_measure(w, qhat))
        wh = math.sqrt(weighted_measure(winv, q))
        for store, far_mask, near_mask in (
            ((g1, h1), b.values[sl_h] >= m, below),
            ((g2, h2), b.values[sl_h] <= m, above),
        ):
            g = np.zeros(shape)
            g[sl_h][far_mask] = np.sqrt(w.values[sl_h][far_mask]) / wg
            h = np.zeros(shape)
            h[sl_q][near_mask] = np.sqrt(winv.values[sl_q][near_mask]) / wh
            store[0][q] = SampledFunction(win, g)
            store[1][q] = SampledFunction(win, h)
    return MedianFamilies(g1, h1, g2, h2, worst, len(g1))


def median_term_sum(T, fams: MedianFamilies, p: float) -> float:
    """(sum over cubes and s of |<T G^s, H^s>|^p)^(1/p), batched per family."""
    keys = fams.cubes()
    if not keys:
        return 0.0
    hv = T.window.cell_volume
    total = 0.0
    for g, h in ((fams.g1, fams.h1), (fams.g2, fams.h2)):
        E = np.stack([g[q].values.ravel() for q in keys], axis=1)
        F = np.stack([h[q].values.ravel() for q in keys], axis=1)
        vals = np.einsum("xq,xq->q", F.conj(), T.entries @ E) * hv
        total += float((np.abs(vals) ** p).sum())
    return total ** (1.0 / p)


def _covered_besov_weighted(b, w, p, cubes) -> float:
    """Weighted dyadic Besov sum restricted to a cube subset."""
    win = b.window
    coeffs = haar_transform(b)
    winv = w.inverse()
    sigs = cancellative_signatures(win.n)
    total = 0.0
    for q in cubes:
        v = sample_count(win, q) * win.cell_volume
        denom = math.sqrt(weighted_measure(w, q) * weighted_measure(winv, q))
        for sig in sigs:
            total += (abs(coeffs.get(q, sig)) * math.sqrt(v) / denom) ** p
    return total ** (1.0 / p)


def exp_median_lower(cfg: ExperimentConfig) -> RatioReport:
    """Besov-to-Schatten lower bound through the median test families.

    The kernel-mode Riesz matrix is used on both sides; the reciprocal-kernel
    far-cube estimate behind the chain needs the pointwise kernel form.
    Besov terms are also restricted to the cubes that have far cubes, so the
    chain's two inequalities are compared on the same cube set.
    """
    rows = []
    worst_fraction = 0.0
    for i, spec in enumerate(cfg.symbols):
        for N in cfg.grid_sizes:
            win = window_for(cfg, N)
            b = symbol_library(spec, win)
            w = weight_from_spec(win, cfg.weight)
            fams = median_families(b, w, cfg.j)
            worst_fraction = max(worst_fraction, fams.max_fraction)
            R = riesz_matrix(cfg.j, win, mode="truncated-kernel")
            T = conjugate_by_weight(commutator(b, R), w)
            term_sum = median_term_sum(T, fams, cfg.p)
            sch = schatten_norm(
                _spectrum_for(cfg, spec, b, w, win, mode="truncated-kernel"),
                cfg.p,
                cfg.p,
            )
            besov_w = besov_dyadic_weighted(b, w, cfg.p)
            covered = _covered_besov_weighted(b, w, cfg.p, fams.cubes())
            tol = DEGENERATE_TOL * _scale(b)
            degenerate = covered <= tol and term_sum <= tol
            rows.append(
                {
                    "symbol": _symbol_label(i, spec),
                    "resolution": N,
                    "besov_weighted": besov_w,
                    "besov_covered": covered,
                    "median_sum": term_sum,
                    "schatten": sch,
                    "c_besov_over_sum": None if degenerate else covered / term_sum,
                    "c_sum_over_schatten": None if degenerate else term_sum / sch,
                    "c_lower": None if degenerate else covered / sch,
                    "max_median_fraction": fams.max_fraction,
                    "cubes": fams.cube_count,
                    "degenerate": degenerate,
                }
            )
    summary = _summarize(r["c_lower"] for r in rows)
    summary["max_median_fraction"] = worst_fraction
    summary["exploratory"] = not (cfg.p > cfg.n)
    return RatioReport(cfg.experiment, tuple(rows), summary)


def far_oscillation_sum(b: SampledFunction, j: int, power: float) -> tuple[float, int]:
    """((sum_Q R_Q^power)^(1/power), cube count) over far-cube-valid cubes.

    R_Q is the mean over Q of |b - avg(b over the far cube)|; cubes whose far
    cube along axis j leaves the window are skipped.
    """
    win = b.window
    total = 0.0
    count = 0
    for q in enumerate_cubes(win, Shift.zero(win.n)):
        try:
            qhat = far_cube(win, q, j)
        except GridError:
            continue
        sl_q = sample_slices(win, q)
        if sl_q is None or sample_slices(win, qhat) is None:
            continue
        r_q = float(np.abs(b.values[sl_q] - cube_average(b, qhat)).mean())
        total += r_q**power
        count += 1
    return total ** (1.0 / power) if total > 0 else 0.0, count


def exp_collapse(cfg: ExperimentConfig) -> RatioReport:
    """Far-cube oscillation sums across depths against the weak Schatten norm.

    A non-constant symbol makes (sum_Q R_Q^n)^(1/n) grow as levels are added
    while S^(n,inf) stays in a bounded band; the two signatures must co-occur.
    """
    spec = cfg.symbols[0]
    n = cfg.n
    rows = []
    sums = []
    weaks = []
    scale = 1.0
    for N in cfg.grid_sizes:
        win = window_for(cfg, N)
        b = symbol_library(spec, win)
        w = weight_from_spec(win, cfg.weight)
        scale = max(scale, _scale(b))
        rsum, count = far_oscillation_sum(b, cfg.j, n)
        weak = schatten_norm(_spectrum_for(cfg, spec, b, w, win), n, math.inf)
        sums.append(rsum)
        weaks.append(weak)
        rows.append(
            {
                "symbol": _symbol_label(0, spec),
                "resolution": N,
                "k_max": win.k_max,
                "collapse_sum": rsum,
                "weak_norm": weak,
                "cubes": count,
            }
        )
    growth = [
        (nxt / prev if prev > 0 else None) for prev, nxt in zip(sums, sums[1:])
    ]
    for row, g in zip(rows[1:], growth):
        row["growth"] = g
    degenerate = all(s <= DEGENERATE_TOL * scale for s in sums)
    finite_growth = [g for g in growth if g is not None]
    monotone = bool(finite_growth) and all(g > 1 for g in finite_growth)
    band = (max(weaks) / min(weaks)) if min(weaks) > 0 else math.inf
    summary = {
        "degenerate": degenerate,
        "growth_min": min(finite_growth) if finite_growth else None,
        "growth_max": max(finite_growth) if finite_growth else None,
        "monotone": monotone,
        "weak_band": band,
        "passed": None if degenerate else (monotone and band <= WEAK_BAND_LIMIT),
    }
    return RatioReport(cfg.experiment, tuple(rows), summary)


def exp_theorem12_critical(cfg: ExperimentConfig) -> RatioReport:
    """Weak Schatten norm at the critical index against the Sobolev seminorm.

    Also runs the oscillation route: the weak Lorentz norm of the cube
    oscillation sequence, compared against both sides.
    """
    n = cfg.n
    rows = []
    osc_ratios = []
    weak_ratios = []
    for i, spec in enumerate(cfg.symbols):
        for N in cfg.grid_sizes:
            win = window_for(cfg, N)
            b = symbol_library(spec, win)
            w = weight_from_spec(win, cfg.weight)
            weak = schatten_norm(_spectrum_for(cfg, spec, b, w, win), n, math.inf)
            sob = sobolev_seminorm(b)
            osc = lorentz_norm(oscillation_sequence(b), LorentzParams(n, math.inf))
            tol = DEGENERATE_TOL * _scale(b)
            degenerate = weak <= tol and sob <= tol
            row = {
                "symbol": _symbol_label(i, spec),
                "resolution": N,
                "weak_norm": weak,
                "sobolev": sob,
                "osc_weak_norm": osc,
                "ratio": None if degenerate else weak / sob,
                "osc_over_sobolev": None if degenerate else osc / sob,
                "weak_over_osc": None if degenerate or osc <= tol else weak / osc,
                "degenerate": degenerate,
            }
            rows.append(row)
            if not degenerate:
                osc_ratios.append(row["osc_over_sobolev"])
                if row["weak_over_osc"] is not None:
                    weak_ratios.append(row["weak_over_osc"])
    summary = _summarize(r["ratio"] for r in rows)
    summary["osc_over_sobolev_min"] = min(osc_ratios) if osc_ratios else None
    summary["osc_over_sobolev_max"] = max(osc_ratios) if osc_ratios else None
    summary["weak_over_osc_min"] = min(weak_ratios) if weak_ratios else None
    summary["weak_over_osc_max"] = max(weak_ratios) if weak_ratios else None
    summary["exploratory"] = n not in (2, 3)
    return RatioReport(cfg.experiment, tuple(rows), summary)


def quantised_block_spectrum(f: SampledFunction, w: Weight) -> tuple[SingularSpectrum, list]:
    """Spectrum of the per-block weight-conjugated quantised derivative (n = 2).

    The two scalar blocks conjugate independently, and the off-diagonal block
    structure makes the spectrum the multiset union of the singular values of
    C1 -/+ i C2 built from the conjugated blocks.
    """
    win = f.window
    conj = [
        conjugate_by_weight(commutator(f, riesz_matrix(j, win)), w).entries
        for j in (1, 2)
    ]
    both = [
        np.linalg.svd(conj[0] - 1j * conj[1], compute_uv=False),
        np.linalg.svd(conj[0] + 1j * conj[1], compute_uv=False),
    ]
    merged = np.sort(np.concatenate(both))[::-1]
    return SingularSpectrum(merged, 2 * f.values.size), conj


def exp_quantised(cfg: ExperimentConfig) -> RatioReport:
    """Weak norm of the quantised derivative against the gradient L2 norm."""
    if cfg.n != 2:
        raise GridError("the quantised experiment is two dimensional")
    rows = []
    per_symbol: dict[str, list] = {}
    oracle_dev = None
    for i, spec in enumerate(cfg.symbols):
        label = _symbol_label(i, spec)
        for N in cfg.grid_sizes:
            win = window_for(cfg, N)
            f = symbol_library(spec, win)
            w = weight_from_spec(win, cfg.weight)
            s, conj = quantised_block_spectrum(f, w)
            weak = schatten_norm(s, 2, math.inf)
            sob = sobolev_seminorm(f, 2)
            tol = DEGENERATE_TOL * _scale(f)
            degenerate = weak <= tol and sob <= tol
            ratio = None if degenerate else weak / sob
            rows.append(
                {
                    "symbol": label,
                    "resolution": N,
                    "weak_norm": weak,
                    "gradient_l2": sob,
                    "ratio": ratio,
                    "degenerate": degenerate,
                }
            )
            if ratio is not None:
                per_symbol.setdefault(label, []).append(ratio)
            if oracle_dev is None and not degenerate and N == cfg.grid_sizes[0]:
                D = quantised_derivative(f, win)
                sq = np.sqrt(np.concatenate([w.values.ravel()] * 2))
                Dw = sq[:, None] * D.entries / sq[None, :]
                full = np.linalg.svd(Dw, compute_uv=False)
                oracle_dev = float(np.abs(full - s.values).max() / s.values[0])
    spreads = [max(v) / min(v) for v in per_symbol.values() if v]
    summary = _summarize(r["ratio"] for r in rows)
    summary["ratio_spread_max"] = max(spreads) if spreads else None
    summary["block_oracle_dev"] = oracle_dev
    return RatioReport(cfg.experiment, tuple(rows), summary)


def exp_besov_equivalence(cfg: ExperimentConfig) -> RatioReport:
    """Dyadic against continuous Besov norms, one system and all systems.

    r1 = dyadic(standard system)/continuous bounds the easy direction; r2 =
    continuous/(sum over the 3^n shifted systems) bounds the converse.
    """
    shifts = list(cfg.shifts) if cfg.shifts is not None else all_shifts(cfg.n)
    zero = Shift.zero(cfg.n)
    rows = []
    per_symbol: dict[str, dict[str, list]] = {}
    for i, spec in enumerate(cfg.symbols):
        label = _symbol_label(i, spec)
        for N in cfg.grid_sizes:
            win = window_for(cfg, N)
            b = symbol_library(spec, win)
            bc = besov_continuous(b, cfg.p)
            by_shift = {s: besov_dyadic(b, cfg.p, shift=s) for s in shifts}
            bd0 = by_shift.get(zero)
            if bd0 is None:
                bd0 = besov_dyadic(b, cfg.p, shift=zero)
            all_sum = sum(by_shift.values())
            tol = DEGENERATE_TOL * _scale(b)
            # Shifted systems see boundary-clipped cubes, which give even a
            # constant symbol nonzero coefficients, so degeneracy is judged
            # on the standard-system pair alone.
            degenerate = bc <= tol and bd0 <= tol
            r1 = None if degenerate else bd0 / bc
            r2 = None if degenerate or all_sum <= tol else bc / all_sum
            rows.append(
                {
                    "symbol": label,
                    "resolution": N,
                    "besov_continuous": bc,
                    "besov_dyadic_zero": bd0,
                    "besov_dyadic_all": all_sum,
                    "r1": r1,
                    "r2": r2,
                    "degenerate": degenerate,
                }
            )
            if not degenerate:
                slot = per_symbol.setdefault(label, {"r1": [], "r2": []})
                slot["r1"].append(r1)
                slot["r2"].append(r2)
    r1_all = [r["r1"] for r in rows if r["r1"] is not None]
    r2_all = [r["r2"] for r in rows if r["r2"] is not None]

    def spread(vals):
        return max(vals) / min(vals) if vals else None

    summary = {
        "r1_max": max(r1_all) if r1_all else None,
        "r2_max": max(r2_all) if r2_all else None,
        "r1_refinement_spread_max": max(
            (spread(v["r1"]) for v in per_symbol.values()), default=None
        ),
        "r2_refinement_spread_max": max(
            (spread(v["r2"]) for v in per_symbol.values()), default=None
        ),
        "exploratory": not (cfg.p > cfg.n),
    }
    return RatioReport(cfg.experiment, tuple(rows), summary)


EXPERIMENTS = {
    "theorem11-upper": exp_theorem11_upper,
    "median-lower": exp_median_lower,
    "collapse": exp_collapse,
    "theorem12-critical": exp_theorem12_critical,
    "quantised": exp_quantised,
    "besov-equivalence": exp_besov_equivalence,
}


def run_experiment(cfg: ExperimentConfig) -> RatioReport:
    return EXPERIMENTS[cfg.experiment](cfg)


def _thread_limit(requested: int) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            cap = int(env)
        except ValueError:
            raise GridError(f"{THREADS_ENV} must be an integer") from None
        if cap < 1:
            raise GridError(f"{THREADS_ENV} must be at least 1")
        requested = min(requested, cap)
    return max(1, requested)


def run_experiments(
    cfgs, threads: int | None = None
) -> list[tuple[ExperimentConfig, RatioReport]]:
    """Run a batch of configs, ordered by config key regardless of schedule."""
    cfgs = list(cfgs)
    workers = _thread_limit(threads if threads is not None else len(cfgs))
    if workers <= 1 or len(cfgs) <= 1:
        reports = [run_experiment(c) for c in cfgs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_experiment, cfgs))
    return sorted(zip(cfgs, reports), key=lambda cr: config_key(cr[0]))


_LEAD_COLUMNS = ("symbol", "resolution")


def report_rows(report: RatioReport) -> tuple[list[str], list[list[str]]]:
    """Header and stringified rows, stable column order, for CSV emission."""
    keys: set = set()
    for row in report.rows:
        keys.update(row)
    lead = [c for c in _LEAD_COLUMNS if c in keys]
    header = lead + sorted(keys - set(lead))
    body = [[_format_cell(row.get(k)) for k in header] for row in report.rows]
    return header, body


def _format_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(v)


def summary_payload(cfg: ExperimentConfig, report: RatioReport) -> dict:
    """JSON-ready summary: config echo plus the summary block."""
    return {
        "experiment": report.experiment,
        "config": json.loads(config_key(cfg)),
        "rows": len(report.rows),
        "summary": {k: _json_value(v) for k, v in sorted(report.summary.items())},
    }


def _json_value(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        v = float(v)
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    return v
