"""Stationary Boolean models, Monte Carlo estimators and 1-D interval sets.

Every replicate draws from its own Philox stream keyed by ``(seed, r)``, and
replicate values are reduced with ``math.fsum``, so estimates depend only on
the seed and not on evaluation order.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .grid import GridError, PixelSet
from .polytope import S2Curve

EXP_QUANTILE = 1e-9  # exceedance probability used to truncate exponential grains


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Counter-based stream for replicate ``r`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(r,))))


# ----------------------------------------------------------------- intervals

@dataclass(frozen=True)
class IntervalSet:
    """Finite union of pairwise disjoint closed intervals, sorted."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        prev = -math.inf
        for a, b in self.intervals:
            if not a < b or not a > prev:
                raise ValueError("intervals must be nondegenerate, sorted and disjoint")
            prev = b

    @classmethod
    def from_union(cls, a: Sequence[float], b: Sequence[float]) -> IntervalSet:
        """Merge possibly overlapping closed intervals ``[a_i, b_i]``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return cls(tuple(_merge(a, b)))

    @property
    def endpoints(self) -> list[float]:
        return [x for ab in self.intervals for x in ab]

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.intervals)

    def measure(self, lo: float = -math.inf, hi: float = math.inf) -> float:
        return math.fsum(max(0.0, min(b, hi) - max(a, lo)) for a, b in self.intervals)

    def perimeter(self, lo: float, hi: float) -> int:
        """Number of interval endpoints in the open interval ``(lo, hi)``."""
        return sum(1 for x in self.endpoints if lo < x < hi)

    def restrict(self, lo: float, hi: float) -> IntervalSet:
        out = [(max(a, lo), min(b, hi)) for a, b in self.intervals if min(b, hi) > max(a, lo)]
        return IntervalSet(tuple(out))


def _merge(a: np.ndarray, b: np.ndarray) -> list[tuple[float, float]]:
    if a.size == 0:
        return []
    order = np.argsort(a, kind="stable")
    a, b = a[order], b[order]
    reach = np.maximum.accumulate(b)
    # a new component starts where the left end clears everything before it
    starts = np.flatnonzero(np.concatenate(([True], a[1:] > reach[:-1])))
    ends = np.concatenate((starts[1:] - 1, [a.size - 1]))
    return [(float(a[s]), float(reach[e])) for s, e in zip(starts, ends)]


def intervals_from_pixels(A: PixelSet) -> IntervalSet:
    """Closed representative of a 1-D pixel set: maximal runs merged."""
    if A.d != 1:
        raise GridError("intervals_from_pixels needs d = 1")
    out = []
    run_start = prev = None
    for (k,) in sorted(A.cells):
        if prev is None or k != prev + 1:
            if prev is not None:
                out.append((run_start / A.n, (prev + 1) / A.n))
            run_start = k
        prev = k
    if prev is not None:
        out.append((run_start / A.n, (prev + 1) / A.n))
    return IntervalSet(tuple(out))


def intervals_to_pixels(X: IntervalSet, n: int) -> PixelSet:
    """Rasterize with endpoints snapped to the nearest multiple of ``1/n``."""
    cells: set[tuple[int]] = set()
    for a, b in X:
        lo, hi = round(a * n), round(b * n)
        cells.update((k,) for k in range(lo, hi))
    return PixelSet(n, 1, frozenset(cells))


def lebesgue_density(X: IntervalSet, x: float) -> Fraction:
    """Density of ``X`` at ``x``: 1 inside, 1/2 at an endpoint, 0 outside."""
    for a, b in X:
        if a < x < b:
            return Fraction(1)
        if x == a or x == b:
            return Fraction(1, 2)
    return Fraction(0)


# ------------------------------------------------------------------- models

@dataclass(frozen=True)
class Grain:
    kind: str  # "fixed" | "exponential" (1-D); "square" | "disk" (2-D)
    param: float  # length, mean length, side, or radius

    def __post_init__(self):
        if self.kind not in ("fixed", "exponential", "square", "disk"):
            raise ValueError(f"unknown grain kind {self.kind!r}")
        if not self.param > 0:
            raise ValueError("grain parameter must be positive")


@dataclass(frozen=True)
class BooleanModel1D:
    """Poisson germs of intensity ``lam`` carrying segments ``[x, x + ℓ]``."""

    lam: float
    grain: Grain = field(default_factory=lambda: Grain("fixed", 1.0))
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("intensity must be nonnegative")
        if self.grain.kind not in ("fixed", "exponential"):
            raise ValueError("1-D grains are 'fixed' or 'exponential'")

    @property
    def mean_length(self) -> float:
        return self.grain.param

    @property
    def reach(self) -> float:
        """Grain-length bound used to dilate the simulation window."""
        if self.grain.kind == "fixed":
            return self.grain.param
        return -self.grain.param * math.log(EXP_QUANTILE)

    @property
    def truncation_bias(self) -> float:
        """Bound on the probability that a truncated grain would reach the window."""
        if self.grain.kind == "fixed":
            return 0.0
        return self.lam * self.grain.param * EXP_QUANTILE

    def vacancy(self) -> float:
        return math.exp(-self.lam * self.mean_length)

    def volume_fraction(self) -> float:
        return 1.0 - self.vacancy()

    def s2(self, y) -> np.ndarray:
        """Closed-form two-point function ``P(0 ∈ X, y ∈ X)``."""
        t = np.abs(np.asarray(y, dtype=float))
        q = self.vacancy()
        ell = self.grain.param
        if self.grain.kind == "fixed":
            both_vacant = np.exp(-self.lam * (ell + np.minimum(t, ell)))
        else:
            # E L(G ∪ (G + t)) = 2μ - E(ℓ - t)_+ = 2μ - μ e^{-t/μ}
            both_vacant = np.exp(-self.lam * (2 * ell - ell * np.exp(-t / ell)))
        return 1.0 - 2.0 * q + both_vacant

    def specific_perimeter(self) -> float:
        """Endpoint intensity: left and right ends each uncovered with probability q."""
        return 2.0 * self.lam * self.vacancy()

    def lipschitz_at_zero(self) -> float:
        return self.lam * self.vacancy()

    def s2_curve(self, h, K: int, keep_callback: bool = True) -> S2Curve:
        return S2Curve.from_function(lambda pts: self.s2(pts[:, 0]), 1, h, K,
                                     keep_callback=keep_callback, label=self.describe())

    def describe(self) -> str:
        return f"boolean1d lambda={self.lam!r} grain={self.grain.kind}:{self.grain.param!r}"

    def to_dict(self) -> dict:
        return {"type": "boolean1d", "lambda": self.lam,
                "grain": {"kind": self.grain.kind, "param": self.grain.param}, "seed": self.seed}


@dataclass(frozen=True)
class BooleanModel2D:
    """Poisson germs in the plane with square or disk grains, rasterized at ``n``.

    A cell belongs to the realization when its center is covered.
    """

    lam: float
    grain: Grain = field(default_factory=lambda: Grain("square", 0.25))
    n: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("intensity must be nonnegative")
        if self.grain.kind not in ("square", "disk"):
            raise ValueError("2-D grains are 'square' or 'disk'")
        if self.n < 1:
            raise ValueError("resolution must be positive")

    @property
    def reach(self) -> float:
        return self.grain.param if self.grain.kind == "square" else 2 * self.grain.param

    def grain_area(self) -> float:
        s = self.grain.param
        return s * s if self.grain.kind == "square" else math.pi * s * s

    def volume_fraction(self) -> float:
        """Continuum coverage ``1 - exp(-λ |G|)`` (before rasterization)."""
        return 1.0 - math.exp(-self.lam * self.grain_area())

    def describe(self) -> str:
        return f"boolean2d lambda={self.lam!r} grain={self.grain.kind}:{self.grain.param!r} n={self.n}"

    def to_dict(self) -> dict:
        return {"type": "boolean2d", "lambda": self.lam,
                "grain": {"kind": self.grain.kind, "param": self.grain.param},
                "n": self.n, "seed": self.seed}


def model_from_dict(obj: dict) -> BooleanModel1D | BooleanModel2D:
    kind = obj.get("type", "boolean1d")
    g = obj.get("grain", {})
    seed = int(obj.get("seed", 0))
    if kind == "boolean1d":
        grain = Grain(g.get("kind", "fixed"), float(g.get("param", 1.0)))
        return BooleanModel1D(float(obj["lambda"]), grain, seed)
    if kind == "boolean2d":
        grain = Grain(g.get("kind", "square"), float(g.get("param", 0.25)))
        return BooleanModel2D(float(obj["lambda"]), grain, int(obj.get("n", 16)), seed)
    raise ValueError(f"unknown model type {kind!r}")


# --------------------------------------------------------------- simulation

def _ring_tiles(ring: int, d: int) -> np.ndarray:
    """Unit tiles (lower corners) of Chebyshev ring ``ring``, in lexicographic order.

    Tiles ``[i, i+1)`` and ``[-i-1, -i)`` share a ring, so rings grow symmetrically.
    """
    span = np.arange(-ring - 1, ring + 1)
    grid = np.array(list(itertools.product(span, repeat=d)), dtype=np.int64).reshape(-1, d)
    level = np.maximum(grid, -grid - 1).max(axis=1)
    return grid[level == ring]


def _germs(model, lo: Sequence[float], hi: Sequence[float], rng: np.random.Generator
           ) -> tuple[np.ndarray, np.ndarray]:
    """Poisson germs (and grain marks) in the box ``[lo, hi)``.

    Germs are drawn ring by ring of unit tiles in a fixed order, so the process
    on any region is the same whatever box is requested.
    """
    d = len(lo)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if model.lam == 0:
        return np.empty((0, d)), np.empty(0)
    corners = np.stack([np.floor(lo), np.ceil(hi) - 1])
    need = int(np.maximum(corners, -corners - 1).max())
    pos, marks = [], []
    exponential = model.grain.kind == "exponential"
    for ring in range(need + 1):
        tiles = _RING_CACHE.get((ring, d))
        if tiles is None:
            tiles = _RING_CACHE.setdefault((ring, d), _ring_tiles(ring, d))
        counts = rng.poisson(model.lam, len(tiles))
        total = int(counts.sum())
        x = np.repeat(tiles, counts, axis=0) + rng.random((total, d))
        m = rng.exponential(model.grain.param, total) if exponential else None
        keep = ((x >= lo) & (x < hi)).all(axis=1)
        pos.append(x[keep])
        if exponential:
            marks.append(m[keep])
    x = np.concatenate(pos)
    m = np.concatenate(marks) if exponential else np.full(len(x), model.grain.param)
    return x, m


_RING_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _simulate_1d(model: BooleanModel1D, lo: float, hi: float, rng: np.random.Generator) -> IntervalSet:
    x, length = _germs(model, [lo - model.reach], [hi], rng)
    x = x[:, 0]
    length = np.minimum(length, model.reach)
    return IntervalSet.from_union(x, x + length).restrict(lo, hi)


def _simulate_2d(model: BooleanModel2D, lo: Sequence[int], hi: Sequence[int],
                 rng: np.random.Generator) -> np.ndarray:
    """Boolean mask over cells ``lo <= k < hi`` (cell centers tested)."""
    n = model.n
    a = np.asarray(lo, dtype=float) / n - model.reach
    b = np.asarray(hi, dtype=float) / n
    germs, _ = _germs(model, a, b, rng)
    shape = tuple(int(h - l) for l, h in zip(lo, hi))
    mask = np.zeros(shape, dtype=bool)
    cx = (np.arange(lo[0], hi[0]) + 0.5) / n
    cy = (np.arange(lo[1], hi[1]) + 0.5) / n
    s = model.grain.param
    for gx, gy in germs:
        if model.grain.kind == "square":
            # grain [g, g + s]^2
            mx = (cx >= gx) & (cx <= gx + s)
            my = (cy >= gy) & (cy <= gy + s)
            mask |= mx[:, None] & my[None, :]
        else:
            # disk of radius s centered at g + (s, s) so the grain sits in [g, g + 2s]^2
            ox, oy = gx + s, gy + s
            ix = np.flatnonzero(np.abs(cx - ox) <= s)
            iy = np.flatnonzero(np.abs(cy - oy) <= s)
            if ix.size and iy.size:
                dx = cx[ix, None] - ox
                dy = cy[None, iy] - oy
                mask[np.ix_(ix, iy)] |= dx * dx + dy * dy <= s * s
    return mask


def simulate(model, window=None, replicate: int = 0):
    """One realization restricted to ``window``.

    1-D models take ``window=(lo, hi)`` (default ``(0, 1)``) and return an exact
    ``IntervalSet``.  2-D models take cell bounds ``(lo, hi)`` (default the unit
    square) and return a ``PixelSet``.
    """
    rng = replicate_rng(model.seed, replicate)
    if isinstance(model, BooleanModel1D):
        lo, hi = window if window is not None else (0.0, 1.0)
        return _simulate_1d(model, float(lo), float(hi), rng)
    lo, hi = window if window is not None else ((0, 0), (model.n, model.n))
    mask = _simulate_2d(model, lo, hi, rng)
    return PixelSet.from_mask(mask, model.n, origin=lo)


# --------------------------------------------------------------- estimation

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float | None
    R: int


def _reduce(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Column means and standard errors with compensated summation."""
    R = samples.shape[0]
    means = np.array([math.fsum(col) / R for col in samples.T])
    if R < 2:
        return means, None
    dev = samples - means
    var = np.array([math.fsum(col) / (R - 1) for col in (dev * dev).T])
    return means, np.sqrt(var / R)


def _overlaps_1d(X: IntervalSet, ys: np.ndarray) -> np.ndarray:
    """``L(X ∩ (X + y) ∩ (0, 1))`` for every shift (rows contiguous per shift)."""
    if len(X) == 0:
        return np.zeros(ys.size)
    a = np.array([p[0] for p in X.intervals])
    b = np.array([p[1] for p in X.intervals])
    lo = np.maximum(np.maximum(a[None, :, None], a[None, None, :] + ys[:, None, None]), 0.0)
    hi = np.minimum(np.minimum(b[None, :, None], b[None, None, :] + ys[:, None, None]), 1.0)
    parts = np.clip(hi - lo, 0.0, None).reshape(ys.size, -1)
    return np.array([math.fsum(row) for row in parts])


def _overlaps_2d(mask: np.ndarray, pad: int, n: int, shifts: Sequence[tuple[int, int]]) -> np.ndarray:
    core = mask[pad:pad + n, pad:pad + n]
    out = np.empty(len(shifts))
    for s, (k0, k1) in enumerate(shifts):
        other = mask[pad - k0:pad - k0 + n, pad - k1:pad - k1 + n]
        out[s] = np.count_nonzero(core & other)
    return out / (n * n)


def covariogram_samples(model, shifts, R: int) -> np.ndarray:
    """Per-replicate ``δ_{y;(0,1)^d}(X)`` with shape ``(R, len(shifts))``.

    1-D shifts are reals; 2-D shifts are lattice vectors in cell units.
    """
    if isinstance(model, BooleanModel1D):
        ys = np.asarray(shifts, dtype=float).ravel()
        Y = float(np.max(np.abs(ys))) if ys.size else 0.0
        out = np.empty((R, ys.size))
        for r in range(R):
            X = _simulate_1d(model, -Y, 1.0 + Y, replicate_rng(model.seed, r))
            out[r] = _overlaps_1d(X, ys)
        return out
    shifts = [tuple(int(v) for v in k) for k in shifts]
    pad = max([abs(v) for k in shifts for v in k] + [0])
    n = model.n
    out = np.empty((R, len(shifts)))
    for r in range(R):
        mask = _simulate_2d(model, (-pad, -pad), (n + pad, n + pad), replicate_rng(model.seed, r))
        out[r] = _overlaps_2d(mask, pad, n, shifts)
    return out


def estimate_specific_covariogram(model, h=None, K: int = 10, R: int = 1000) -> S2Curve:
    """Monte Carlo specific covariogram on ``{-K h, ..., K h}^d`` with standard errors.

    For 2-D models the lattice step is fixed to ``1/n``.
    """
    if isinstance(model, BooleanModel1D):
        if h is None:
            raise ValueError("1-D estimation needs a lattice step h")
        hf = Fraction(h) if not isinstance(h, float) else Fraction(repr(h))
        ys = np.array([float(m * hf) for m in range(-K, K + 1)])
        means, se = _reduce(covariogram_samples(model, ys, R))
        return S2Curve(1, hf, means, se, normalized=True, label=model.describe())
    shifts = [(a, b) for a in range(-K, K + 1) for b in range(-K, K + 1)]
    means, se = _reduce(covariogram_samples(model, shifts, R))
    shape = (2 * K + 1, 2 * K + 1)
    se = None if se is None else se.reshape(shape)
    return S2Curve(2, Fraction(1, model.n), means.reshape(shape), se, normalized=True,
                   label=model.describe())


def estimate_covariogram_at(model: BooleanModel1D, ys: Sequence[float], R: int) -> list[Estimate]:
    means, se = _reduce(covariogram_samples(model, np.asarray(ys, dtype=float), R))
    return [Estimate(float(m), None if se is None else float(s), R)
            for m, s in zip(means, se if se is not None else means)]


def estimate_volume_fraction(model, R: int) -> Estimate:
    """Mean ``L^d(X ∩ (0,1)^d)``; uses the zero-shift covariogram path on purpose."""
    zero = [0.0] if isinstance(model, BooleanModel1D) else [(0, 0)]
    means, se = _reduce(covariogram_samples(model, zero, R))
    return Estimate(float(means[0]), None if se is None else float(se[0]), R)


def _faces_2d(mask: np.ndarray) -> int:
    return int(np.count_nonzero(mask[1:, :] != mask[:-1, :]) + np.count_nonzero(mask[:, 1:] != mask[:, :-1]))


def estimate_specific_perimeter(model, R: int) -> Estimate:
    """Mean perimeter in the unit window.

    1-D counts interval endpoints in ``(0, 1)``; 2-D counts cell faces inside
    the unit square, which estimates the pixelized model's ``Per_B``.
    """
    vals = np.empty((R, 1))
    for r in range(R):
        rng = replicate_rng(model.seed, r)
        if isinstance(model, BooleanModel1D):
            X = _simulate_1d(model, 0.0, 1.0, rng)
            vals[r, 0] = X.perimeter(0.0, 1.0)
        else:
            n = model.n
            mask = _simulate_2d(model, (0, 0), (n, n), rng)
            vals[r, 0] = _faces_2d(mask) / (n ** (2 - 1))
    means, se = _reduce(vals)
    return Estimate(float(means[0]), None if se is None else float(se[0]), R)
