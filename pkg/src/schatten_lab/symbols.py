"""Deterministic symbol families for the experiment harness.

Each symbol is produced from a small declarative spec so experiment runs can
be reproduced bit for bit from their config: the only randomness is a seeded
generator, used by the haar-random kind.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import GridError, GridWindow, Shift, enumerate_cubes, sample_slices
from .haar import (
    HaarCoefficients,
    HaarIndex,
    SampledFunction,
    cancellative_signatures,
    sample_function,
    synthesize,
)

KINDS = ("constant", "gaussian-bump", "sine-product", "power", "haar-random", "near-constant")


@dataclass(frozen=True)
class SymbolSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GridError(f"unknown symbol kind {self.kind!r}")

    def key(self) -> str:
        """Canonical string identity, stable across runs."""
        return json.dumps(
            {"kind": self.kind, "params": self.params, "seed": self.seed},
            sort_keys=True,
        )


def default_family(n: int) -> tuple[SymbolSpec, ...]:
    """Six stock symbols spanning smooth, oscillatory, rough and flat."""
    c = tuple(0.5 for _ in range(n))
    c_off = tuple(0.4 + 0.1 * i for i in range(n))
    return (
        SymbolSpec("gaussian-bump", {"center": c, "width": 0.15, "amplitude": 1.0}),
        SymbolSpec("sine-product", {"frequency": 2, "amplitude": 1.0}),
        SymbolSpec("sine-product", {"frequency": 4, "amplitude": 1.0}),
        SymbolSpec("power", {"center": c_off, "beta": 0.6}),
        SymbolSpec("haar-random", {"decay": 0.3}, seed=7),
        SymbolSpec("near-constant", {"base": 1.0, "epsilon": 1e-3}),
    )


def _center(params: dict, n: int) -> tuple[float, ...]:
    c = tuple(float(x) for x in params.get("center", (0.5,) * n))
    if len(c) != n:
        raise GridError(f"center has {len(c)} coordinates, window has {n}")
    return c


def _haar_random(spec: SymbolSpec, win: GridWindow) -> SampledFunction:
    r = float(spec.params.get("decay", 0.3))
    rng = np.random.default_rng(spec.seed)
    shift = Shift.zero(win.n)
    sigs = cancellative_signatures(win.n)
    data = {}
    for q in enumerate_cubes(win, shift):
        if sample_slices(win, q) is None:
            continue
        mag = float(q.volume) ** (0.5 + r)
        for sig in sigs:
            sign = 1.0 if rng.integers(0, 2) else -1.0
            data[HaarIndex(q, sig)] = sign * mag
    coeffs = HaarCoefficients(win, shift, data, window_mean=0.0, method="synthetic")
    return synthesize(coeffs, include_mean=False)


def symbol_library(spec: SymbolSpec, win: GridWindow) -> SampledFunction:
    """Sample the symbol described by spec on the window's grid."""
    p = spec.params
    if spec.kind == "constant":
        value = float(p.get("value", 1.0))
        return sample_function(win, lambda *xs: np.full_like(xs[0], value))
    if spec.kind == "gaussian-bump":
        c = _center(p, win.n)
        s = float(p.get("width", 0.15))
        amp = float(p.get("amplitude", 1.0))
        if s <= 0:
            raise GridError("gaussian width must be positive")

        def bump(*xs):
            r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
            return amp * np.exp(-r2 / s**2)

        return sample_function(win, bump)
    if spec.kind == "sine-product":
        freq = float(p.get("frequency", 2))
        amp = float(p.get("amplitude", 1.0))

        def sine(*xs):
            out = np.full_like(xs[0], amp)
            for x in xs:
                out = out * np.sin(2 * math.pi * freq * x)
            return out

        return sample_function(win, sine)
    if spec.kind == "power":
        c = _center(p, win.n)
        beta = float(p.get("beta", 0.6))

        def power(*xs):
            r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
            return r2 ** (beta / 2.0)

        return sample_function(win, power)
    if spec.kind == "near-constant":
        base = float(p.get("base", 1.0))
        eps = float(p.get("epsilon", 1e-3))

        def wobble(*xs):
            out = np.full_like(xs[0], base)
            bump = eps
            for x in xs:
                bump = bump * np.cos(2 * math.pi * x)
            return out + bump

        return sample_function(win, wobble)
    return _haar_random(spec, win)


def gaussian_gradient_l2(spec: SymbolSpec) -> float:
    """Closed form of ||grad b||_(L^2) for the 2D gaussian bump.

    With b = A exp(-|x-c|^2/s^2) the squared gradient integrates to pi A^2
    independently of the width.
    """
    if spec.kind != "gaussian-bump":
        raise GridError("closed form only covers the gaussian bump")
    amp = float(spec.params.get("amplitude", 1.0))
    return amp * math.sqrt(math.pi)
