"""Dyadic cube systems on a sampled window.

Cubes live in one of the 3^n translated dyadic systems indexed by a shift
vector omega with entries in {0, 1/3, 2/3}: the cube with level k and offset
m is 2^-k * ([0,1)^n + m + (-1)^k omega).  The alternating sign is what makes
the shifted systems nested: the children of a level-k cube are level-(k+1)
cubes with integer offsets 2*m + (-1)^k * (3*omega) + delta, delta in {0,1}^n.

All geometry is carried exactly: shifts are stored as integer numerators over
3 and corners are Fractions, so nestedness, containment and sample membership
are decided without floating-point ties.  Sample points sit at cell centers,
which never coincide with a cube boundary of any of the 3^n systems.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction


class GridError(ValueError):
    """Raised when a request leaves the grid window or violates its layout."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Shift:
    """Shift vector of one dyadic system; entries are thirds: omega_i = thirds_i / 3."""

    thirds: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.thirds or any(t not in (0, 1, 2) for t in self.thirds):
            raise GridError(f"shift thirds must be in {{0,1,2}}, got {self.thirds}")

    @classmethod
    def zero(cls, n: int) -> "Shift":
        return cls((0,) * n)

    @classmethod
    def from_omega(cls, omega) -> "Shift":
        thirds = []
        for w in omega:
            t = Fraction(w).limit_denominator(3) * 3
            if t.denominator != 1 or int(t) not in (0, 1, 2):
                raise GridError(f"shift entries must be 0, 1/3 or 2/3, got {w}")
            thirds.append(int(t))
        return cls(tuple(thirds))

    @property
    def n(self) -> int:
        return len(self.thirds)

    @property
    def omega(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(t, 3) for t in self.thirds)

    @property
    def is_zero(self) -> bool:
        return all(t == 0 for t in self.thirds)

    def __str__(self) -> str:
        return ",".join("0" if t == 0 else f"{t}/3" for t in self.thirds)


def all_shifts(n: int) -> list[Shift]:
    """The 3^n shifts, lexicographic in thirds; the zero shift comes first."""
    return [Shift(t) for t in itertools.product((0, 1, 2), repeat=n)]


@dataclass(frozen=True)
class CubeId:
    """One dyadic cube: shift system, level k (side 2^-k) and integer offset."""

    shift: Shift
    level: int
    offset: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.offset) != self.shift.n:
            raise GridError("offset dimension != shift dimension")

    @property
    def n(self) -> int:
        return self.shift.n

    @property
    def side(self) -> Fraction:
        return Fraction(1, 2) ** self.level

    @property
    def volume(self) -> Fraction:
        return self.side**self.n

    @property
    def parity(self) -> int:
        """(-1)^level."""
        return -1 if self.level % 2 else 1

    def lower_exact(self) -> tuple[Fraction, ...]:
        s = self.parity
        return tuple(
            (Fraction(3 * m + s * t, 3)) * self.side
            for m, t in zip(self.offset, self.shift.thirds)
        )

    def upper_exact(self) -> tuple[Fraction, ...]:
        return tuple(lo + self.side for lo in self.lower_exact())

    def center_exact(self) -> tuple[Fraction, ...]:
        half = self.side / 2
        return tuple(lo + half for lo in self.lower_exact())

    def contains_point(self, x) -> bool:
        lo = self.lower_exact()
        hi = self.upper_exact()
        return all(lo[i] <= Fraction(x[i]) < hi[i] for i in range(self.n))

    def __str__(self) -> str:
        return cube_id_to_str(self)


def cube_id_to_str(q: CubeId) -> str:
    """Serialize as "omega:k:m1,...,mn", e.g. "0,1/3:2:3,5"."""
    return f"{q.shift}:{q.level}:" + ",".join(str(m) for m in q.offset)


def cube_id_from_str(s: str) -> CubeId:
    try:
        omega_s, level_s, offs_s = s.split(":")
        thirds = []
        for part in omega_s.split(","):
            if part == "0":
                thirds.append(0)
            else:
                num, den = part.split("/")
                if den != "3" or num not in ("1", "2"):
                    raise ValueError(part)
                thirds.append(int(num))
        offset = tuple(int(p) for p in offs_s.split(","))
        return CubeId(Shift(tuple(thirds)), int(level_s), offset)
    except (ValueError, GridError) as exc:
        raise GridError(f"bad cube id string {s!r}") from exc


def cube_geometry(q: CubeId) -> tuple[tuple[float, ...], float]:
    """(lower corner, side).  Exact for the standard system, <= 1 ulp shifted."""
    return tuple(float(lo) for lo in q.lower_exact()), float(q.side)


def children(q: CubeId) -> list[CubeId]:
    """The 2^n children, lexicographic in delta (first child = delta 0)."""
    s = q.parity
    base = tuple(2 * m + s * t for m, t in zip(q.offset, q.shift.thirds))
    out = []
    for delta in itertools.product((0, 1), repeat=q.n):
        off = tuple(b + d for b, d in zip(base, delta))
        out.append(CubeId(q.shift, q.level + 1, off))
    return out


def parent(q: CubeId) -> CubeId:
    sp = -q.parity  # (-1)^(level-1)
    off = []
    for m, t in zip(q.offset, q.shift.thirds):
        off.append((m - sp * t) // 2)
    return CubeId(q.shift, q.level - 1, tuple(off))


@dataclass(frozen=True)
class GridWindow:
    """Axis-aligned cubic sample window.

    domain = origin + [0, extent)^n, sampled at N midpoints per axis
    (x_j = origin + (j + 1/2) h, h = extent / N); cube levels run over
    [k_min, k_max].  N is a power of two and the finest cubes keep at least
    two samples per side so their Haar functions are resolvable.
    """

    origin: tuple[float, ...]
    extent: float
    levels: tuple[int, int]
    samples_per_side: int

    def __post_init__(self) -> None:
        if self.extent <= 0:
            raise GridError("window extent must be positive")
        if not _is_power_of_two(self.samples_per_side):
            raise GridError("samples_per_side must be a power of two")
        k_min, k_max = self.levels
        if k_min > k_max:
            raise GridError("level range must satisfy k_min <= k_max")
        # finest cubes must contain >= 2 samples per side
        if self.samples_per_cube_side(k_max) < 2:
            raise GridError(
                f"level {k_max} cubes hold < 2 samples per side at N={self.samples_per_side}"
            )

    @property
    def n(self) -> int:
        return len(self.origin)

    @property
    def k_min(self) -> int:
        return self.levels[0]

    @property
    def k_max(self) -> int:
        return self.levels[1]

    @property
    def h(self) -> float:
        return self.extent / self.samples_per_side

    @property
    def h_exact(self) -> Fraction:
        return Fraction(self.extent) / self.samples_per_side

    def samples_per_cube_side(self, level: int) -> Fraction:
        return Fraction(1, 2) ** level / self.h_exact

    def origin_exact(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(o) for o in self.origin)

    def domain_upper_exact(self) -> tuple[Fraction, ...]:
        e = Fraction(self.extent)
        return tuple(Fraction(o) + e for o in self.origin)

    def axis(self, i: int):
        import numpy as np

        h = self.extent / self.samples_per_side
        return self.origin[i] + (np.arange(self.samples_per_side) + 0.5) * h

    def axes(self):
        return [self.axis(i) for i in range(self.n)]

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def is_aligned(self) -> bool:
        """True when the domain is exactly one standard cube at level k_min."""
        side = Fraction(1, 2) ** self.k_min
        if Fraction(self.extent) != side:
            return False
        return all((Fraction(o) / side).denominator == 1 for o in self.origin)

    def finest_full_level(self) -> int:
        """Deepest level at which cubes still hold >= 2 samples per side."""
        k = self.k_max
        while self.samples_per_cube_side(k + 1) >= 2:
            k += 1
        return k


def unit_window(n: int, samples_per_side: int, k_max: int, k_min: int = 0) -> GridWindow:
    """The standard window: [0,1)^n, levels [k_min, k_max]."""
    return GridWindow((0.0,) * n, 1.0, (k_min, k_max), samples_per_side)


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _floor_frac(x: Fraction) -> int:
    return x.numerator // x.denominator


def sample_slices(win: GridWindow, q: CubeId) -> tuple[slice, ...] | None:
    """Per-axis index slices of the samples inside q (clipped); None if empty."""
    h = win.h_exact
    origin = win.origin_exact()
    lo = q.lower_exact()
    hi = q.upper_exact()
    n = win.samples_per_side
    out = []
    for i in range(win.n):
        # centers c_j = origin + (j + 1/2) h ; c_j >= lo  <=>  j >= (lo-origin)/h - 1/2
        a = _ceil_frac((lo[i] - origin[i]) / h - Fraction(1, 2))
        b = _ceil_frac((hi[i] - origin[i]) / h - Fraction(1, 2))
        a, b = max(a, 0), min(b, n)
        if a >= b:
            return None
        out.append(slice(a, b))
    return tuple(out)


def sample_count(win: GridWindow, q: CubeId) -> int:
    sl = sample_slices(win, q)
    if sl is None:
        return 0
    c = 1
    for s in sl:
        c *= s.stop - s.start
    return c


def locate(win: GridWindow, shift: Shift, level: int, x) -> CubeId:
    """The level-`level` cube of the given system containing the point x."""
    if not (win.k_min <= level <= win.k_max):
        raise GridError(f"level {level} outside window range {win.levels}")
    s = -1 if level % 2 else 1
    scale = Fraction(2) ** level
    off = []
    for xi, t in zip(x, shift.thirds):
        off.append(_floor_frac(Fraction(xi) * scale - Fraction(s * t, 3)))
    return CubeId(shift, level, tuple(off))


def enumerate_cubes(win: GridWindow, shift: Shift) -> list[CubeId]:
    """All cubes of the system meeting the domain, level-major then lex offset."""
    out = []
    origin = win.origin_exact()
    upper = win.domain_upper_exact()
    for level in range(win.k_min, win.k_max + 1):
        s = -1 if level % 2 else 1
        scale = Fraction(2) ** level
        ranges = []
        for i in range(win.n):
            sh = Fraction(s * shift.thirds[i], 3)
            # lower(m) = (m + sh) / scale ; need lower < upper and lower + side > origin
            m_lo = _floor_frac(origin[i] * scale - sh)  # smallest m with m+sh+1 > origin*scale
            if origin[i] * scale - sh == m_lo:
                pass  # m = m_lo gives lower == origin: included
            m_hi = _ceil_frac(upper[i] * scale - sh) - 1  # largest m with m+sh < upper*scale
            ranges.append(range(m_lo, m_hi + 1))
        for off in itertools.product(*ranges):
            out.append(CubeId(shift, level, off))
    return out


@dataclass(frozen=True)
class WhitneyPair:
    """Product box q x r of same-level separated (or finest-adjacent) cubes."""

    q: CubeId
    r: CubeId
    s: int  # partner index of r among q's partners, 1-based
    closure: bool = False  # finest-level adjacent tier completing the coverage

    @property
    def gap(self) -> Fraction:
        return pair_gap(self.q, self.r)


def pair_gap(q: CubeId, r: CubeId) -> Fraction:
    """Sup-metric gap between the boxes (0 if they touch or overlap)."""
    if q.level != r.level or q.shift != r.shift:
        raise GridError("gap is defined for same-level same-system cubes")
    side = q.side
    g = Fraction(0)
    for mq, mr in zip(q.offset, r.offset):
        gi = (abs(mq - mr) - 1) * side
        if gi > g:
            g = gi
    return g


def _separated(q: CubeId, r: CubeId) -> bool:
    return pair_gap(q, r) >= q.side


def whitney_pairs(win: GridWindow, shift: Shift | None = None) -> list[WhitneyPair]:
    """Whitney product decomposition of the off-diagonal region.

    Separated tier: same-level pairs with sup gap in [ell, 4*ell), emitted at
    the first level where the containing cubes separate (parents not
    separated).  Closure tier (closure=True): distinct adjacent pairs at the
    finest level, whose ancestors never separate.  Together they cover every
    ordered sample pair (x, y) with |x-y|_inf >= 2^-k_max exactly once.
    """
    if shift is None:
        shift = Shift.zero(win.n)
    pairs: list[WhitneyPair] = []
    counts: dict[CubeId, int] = {}

    def _emit(q: CubeId, r: CubeId, closure: bool) -> None:
        sidx = counts.get(q, 0) + 1
        counts[q] = sidx
        pairs.append(WhitneyPair(q, r, sidx, closure))

    for level in range(win.k_min, win.k_max + 1):
        cubes = [c for c in enumerate_cubes_at(win, shift, level)]
        index = {c.offset: c for c in cubes}
        last = level == win.k_max
        for q in cubes:
            # separated partners: some |dm_i| >= 2, all |dm_i| <= 5
            for dm in itertools.product(range(-5, 6), repeat=win.n):
                if all(d == 0 for d in dm):
                    continue
                off = tuple(m + d for m, d in zip(q.offset, dm))
                r = index.get(off)
                if r is None:
                    continue
                if _separated(q, r):
                    if pair_gap(q, r) < 4 * q.side and not _separated(parent(q), parent(r)):
                        _emit(q, r, False)
                elif last and all(abs(d) <= 1 for d in dm):
                    # never separated at any coarser level either (monotone)
                    _emit(q, r, True)
    return pairs


def enumerate_cubes_at(win: GridWindow, shift: Shift, level: int) -> list[CubeId]:
    """Level slice of enumerate_cubes, in the same lexicographic order."""
    sub = GridWindow(win.origin, win.extent, (level, level), win.samples_per_side)
    return enumerate_cubes(sub, shift)


def whitney_partner_bound(pairs: list[WhitneyPair], separated_only: bool = True) -> int:
    """The reported constant M = max number of partners per cube."""
    counts: dict[CubeId, int] = {}
    for p in pairs:
        if separated_only and p.closure:
            continue
        counts[p.q] = counts.get(p.q, 0) + 1
    return max(counts.values(), default=0)


def far_cube(win: GridWindow, q: CubeId, j: int) -> CubeId:
    """Translate of q by +2*ell(q) along axis j (1-based); must stay in-window."""
    if not (1 <= j <= q.n):
        raise GridError(f"axis j={j} out of range 1..{q.n}")
    off = list(q.offset)
    off[j - 1] += 2
    qh = CubeId(q.shift, q.level, tuple(off))
    lo = qh.lower_exact()
    hi = qh.upper_exact()
    origin = win.origin_exact()
    upper = win.domain_upper_exact()
    for i in range(win.n):
        if lo[i] < origin[i] or hi[i] > upper[i]:
            raise GridError(f"far cube {qh} exits the window domain")
    return qh


def shifted_cover_witness(win: GridWindow, q: CubeId, factor: int = 5) -> CubeId | None:
    """A cube J of some shifted system with factor*Q subset J and |J| <= C|Q|.

    Candidate levels run over the window band [k_min, q.level], restricted to
    sides >= factor * ell(q); the finest (smallest C) witness is returned.
    Coarse cubes whose dilate outgrows every admissible window scale have no
    witness and are reported by shifted_cover_report, not asserted against.
    """
    c = q.center_exact()
    half = Fraction(factor) * q.side / 2
    big_lo = tuple(ci - half for ci in c)
    big_hi = tuple(ci + half for ci in c)
    k_hi = q.level - max(1, math.ceil(math.log2(factor)))  # first side >= factor*ell
    while Fraction(1, 2) ** k_hi < factor * q.side:
        k_hi -= 1
    for level in range(k_hi, win.k_min - 1, -1):  # smallest candidate first
        s = -1 if level % 2 else 1
        scale = Fraction(2) ** level
        for shift in all_shifts(win.n):
            off = tuple(
                _floor_frac(big_lo[i] * scale - Fraction(s * shift.thirds[i], 3))
                for i in range(win.n)
            )
            j = CubeId(shift, level, off)
            jlo, jhi = j.lower_exact(), j.upper_exact()
            if all(jlo[i] <= big_lo[i] and big_hi[i] <= jhi[i] for i in range(win.n)):
                return j
    return None


def shifted_cover_report(win: GridWindow, factor: int = 5) -> dict:
    """Witness search over every window cube; boundary failures are reported."""
    found: dict[str, str] = {}
    failures: list[str] = []
    for shift in all_shifts(win.n):
        for q in enumerate_cubes(win, shift):
            w = shifted_cover_witness(win, q, factor)
            if w is None:
                failures.append(str(q))
            else:
                found[str(q)] = str(w)
    return {"found": found, "failures": failures, "factor": factor}
