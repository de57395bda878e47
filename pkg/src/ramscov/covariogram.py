"""Local covariograms of pixel sets and the perimeter functionals built on them.

All values are computed from exact integer cell counts.  Functions return
floats by default and :class:`fractions.Fraction` with ``exact=True``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .grid import (
    Cell,
    GridError,
    PixelSet,
    Window,
    as_lattice,
    axis_shift,
    erode_segment_lattice,
    translate_window,
)

# above this many cells in A ∩ W the vectorized path is used
DENSE_THRESHOLD = 64


def _out(count: int, denom: int, exact: bool):
    v = Fraction(count, denom)
    return v if exact else float(v)


def _covariogram_count_direct(A: PixelSet, k: Cell, W: Window) -> int:
    cells = A.cells
    count = 0
    for c in cells & W.cells:
        if tuple(a - b for a, b in zip(c, k)) in cells:
            count += 1
    return count


def _covariogram_count_dense(A: PixelSet, k: Cell, W: Window) -> int:
    inside = A.cells & W.cells
    if not inside:
        return 0
    lo, hi = A.bounds()
    mask = A.to_mask(lo, hi)
    idx = np.array(list(inside), dtype=np.int64) - np.asarray(k) - np.asarray(lo)
    ok = np.all((idx >= 0) & (idx < np.asarray(mask.shape)), axis=1)
    return int(mask[tuple(idx[ok].T)].sum())


def covariogram_count(A: PixelSet, k: Cell, W: Window, method: str = "auto") -> int:
    """``#{cells of A ∩ W whose translate by -k is in A}`` (lattice shift ``k``).

    This is ``n^d δ_{k/n;W}(A)``.  ``method`` is ``"direct"``, ``"dense"`` or
    ``"auto"``; both paths return the same integer.
    """
    A._compat(W)
    k = tuple(k)
    if len(k) != A.d:
        raise GridError(f"shift has dimension {len(k)}, expected {A.d}")
    if method == "auto":
        method = "dense" if len(A.cells) > DENSE_THRESHOLD else "direct"
    if method == "direct":
        return _covariogram_count_direct(A, k, W)
    if method == "dense":
        return _covariogram_count_dense(A, k, W)
    raise ValueError(f"unknown method {method!r}")


def local_covariogram(A: PixelSet, y, W: Window, exact: bool = False):
    """``δ_{y;W}(A) = L^d(A ∩ (y + A) ∩ W)`` for a grid-aligned shift ``y``."""
    k = as_lattice(y, A.n, A.d)
    return _out(covariogram_count(A, k, W), A.n**A.d, exact)


def domain_window(y, W: Window) -> Window:
    """``W ∪ (-y + W)``: the only part of a set that ``δ_{y;W}`` sees."""
    k = as_lattice(y, W.n, W.d)
    return W | translate_window(W, tuple(-v for v in k))


def sigma_count(A: PixelSet, k: Cell, W: Window) -> int:
    """Integer numerator of ``σ_{k/n;W}(A)``; see :func:`sigma`."""
    k = tuple(k)
    if not any(k):
        raise GridError("sigma needs a nonzero shift")
    mk = tuple(-v for v in k)
    W_minus = erode_segment_lattice(W, mk)  # W ⊖ [-u, 0]
    W_plus = erode_segment_lattice(W, k)  # W ⊖ [0, u]
    zero = (0,) * A.d
    return (
        covariogram_count(A, zero, W_minus)
        - covariogram_count(A, k, W_minus)
        + covariogram_count(A, zero, W_plus)
        - covariogram_count(A, mk, W_plus)
    )


def sigma(A: PixelSet, u, W: Window, exact: bool = False):
    """Four-term covariogram difference quotient ``σ_{u;W}(A)``.

    ``u`` must be nonzero, axis-aligned and a multiple of ``1/n``.  For
    ``|u| = 1/n`` along ``e_j`` the value is the directional variation
    ``V_{e_j}(A; W)``; for any ``u`` it lies in ``[0, V_{u/|u|}(A; W)]``.
    """
    A._compat(W)
    k = as_lattice(u, A.n, A.d)
    nz = [v for v in k if v != 0]
    if not nz:
        raise GridError("sigma needs a nonzero shift")
    if len(nz) > 1:
        raise GridError("sigma needs an axis-aligned shift")
    m = abs(nz[0])
    return _out(sigma_count(A, k, W), A.n ** (A.d - 1) * m, exact)


def face_count(A: PixelSet, j: int, W: Window) -> int:
    """Number of cell faces orthogonal to ``e_j`` inside ``W`` separating A from its complement."""
    A._compat(W)
    cells, win = A.cells, W.cells
    count = 0
    for c in cells:
        if c not in win:
            continue
        for step in (1, -1):
            nb = list(c)
            nb[j] += step
            nb = tuple(nb)
            if nb in win and nb not in cells:
                count += 1
    return count


def directional_variation(A: PixelSet, j: int, W: Window, exact: bool = False):
    """``V_{e_j}(A; W)`` by face counting: faces times ``n^{-(d-1)}``."""
    return _out(face_count(A, j, W), A.n ** (A.d - 1), exact)


def perimeter_B(A: PixelSet, W: Window, exact: bool = False):
    """Anisotropic perimeter ``Σ_j V_{e_j}(A; W)``.

    For a pixel set the boundary normals are axis-aligned, so this is also the
    variational perimeter and the boundary face area inside ``W``.
    """
    count = sum(face_count(A, j, W) for j in range(A.d))
    return _out(count, A.n ** (A.d - 1), exact)


def perimeter_B_sigma(A: PixelSet, W: Window, exact: bool = False):
    """``Σ_j σ_{e_j/n;W}(A)``: same value as :func:`perimeter_B`, via covariograms."""
    count = sum(sigma_count(A, axis_shift(j, 1, A.d), W) for j in range(A.d))
    return _out(count, A.n ** (A.d - 1), exact)


# ------------------------------------------------------ weighted perimeter

def beta_weight(m: int, d: int) -> float:
    """``β_m = 2^{-m} (2m)^{-d}``, chosen so that ``Σ_m β_m L^d(U_m) = 1``."""
    return 2.0**-m * (2.0 * m) ** -d


def beta_tail(p: int, d: int) -> tuple[float, float]:
    """``Σ_{m>p} β_m`` and a bound on what the partial sum leaves out.

    Terms are summed until the remainder bound ``2^{-d-P}(P+1)^{-d}`` drops
    below machine precision relative to the sum.
    """
    terms = []
    P = p
    while True:
        P += 1
        terms.append(beta_weight(P, d))
        remainder = 2.0 ** (-d - P) * (P + 1.0) ** -d
        total = math.fsum(terms)
        if remainder <= 1e-17 * total or remainder == 0.0:
            return total, remainder


def cube_window(n: int, d: int, half_width_cells: int) -> Window:
    """``(-h/n, h/n)^d`` at resolution ``n``, ``h`` in cell units."""
    h = half_width_cells
    return Window.box(n, (-h,) * d, (h,) * d)


def U_window(m: int, n: int, d: int) -> Window:
    """``U_m = (-m, m)^d`` at resolution ``n``."""
    return cube_window(n, d, m * n)


def U_np_window(n: int, p: int, d: int) -> Window:
    """``U_n^p = (-p - 1/n, p + 1/n)^d`` at resolution ``n``."""
    return cube_window(n, d, p * n + 1)


def _saturation_index(A: PixelSet) -> int:
    """Smallest ``m`` with ``closure(A) ⊂ U_m``; beyond it ``Per_B(A; U_m)`` is constant."""
    if not A.cells:
        return 1
    arr = A.to_array()
    n = A.n
    # need -m n + 1 <= k and k + 1 <= m n - 1
    need = max(int(np.max(1 - arr)), int(np.max(arr + 2)))
    return max(1, -(-need // n))


@dataclass(frozen=True)
class WeightedPerimeter:
    value: float
    tail_remainder: float
    saturation: int  # first m with U_m ⊇ closure(A)


def weighted_perimeter_full(A: PixelSet) -> WeightedPerimeter:
    """``Per_B^β(A) = Σ_m β_m Per_B(A; U_m)`` with the constant tail in closed form."""
    n, d = A.n, A.d
    M = _saturation_index(A)
    parts = [beta_weight(m, d) * perimeter_B(A, U_window(m, n, d)) for m in range(1, M)]
    tail, rem = beta_tail(M - 1, d)
    final = perimeter_B(A, U_window(M, n, d))
    parts.append(tail * final)
    return WeightedPerimeter(math.fsum(parts), rem * final, M)


def weighted_perimeter(A: PixelSet) -> float:
    return weighted_perimeter_full(A).value


def g_np(A: PixelSet, n: int, p: int) -> float:
    """Covariogram functional that equals ``Per_B^β`` on sets inside ``(-p, p)^d``.

    ``Σ_{m≤p} β_m Σ_j σ_{e_j/n;U_m}(A) + (Σ_{m>p} β_m) Σ_j σ_{e_j/n;U_n^p}(A)``.
    The finite sum uses ``U_m`` and the tail uses ``U_n^p``; with these
    windows the identity with ``Per_B^β`` holds exactly on ``(-p, p)^d``.
    """
    if A.n != n:
        raise GridError(f"set has resolution {A.n}, expected {n}")
    d = A.d
    parts = [
        beta_weight(m, d) * float(perimeter_B_sigma(A, U_window(m, n, d), exact=True))
        for m in range(1, p + 1)
    ]
    tail, _ = beta_tail(p, d)
    parts.append(tail * float(perimeter_B_sigma(A, U_np_window(n, p, d), exact=True)))
    return math.fsum(parts)


def E_np(n: int, p: int, d: int) -> float:
    """Clipping error bound ``8 d n 2^{-p} (p+1)^{-d} ((p + 1/n)^d - p^d)``."""
    v = (
        8 * d * n * Fraction(1, 2**p) * Fraction(1, (p + 1) ** d)
        * ((p + Fraction(1, n)) ** d - p**d)
    )
    return float(v)


def clip_to_cube(A: PixelSet, p: int) -> PixelSet:
    """``A ∩ (-p, p)^d``."""
    return A & cube_window(A.n, A.d, p * A.n)


# ------------------------------------------------------- continuity bounds

@dataclass(frozen=True)
class BoundCheck:
    name: str
    lhs: Fraction
    rhs: Fraction

    @property
    def margin(self) -> Fraction:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.margin >= 0


@dataclass(frozen=True)
class ContinuityReport:
    checks: tuple[BoundCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def margins(self) -> dict[str, float]:
        return {c.name: float(c.margin) for c in self.checks}


def continuity_bounds_check(A: PixelSet, B: PixelSet, y, W: Window, U: Window,
                            z: Sequence | None = None) -> ContinuityReport:
    """Evaluate both sides of the covariogram continuity bounds.

    * ``window``: ``|δ_{y;U}(A) - δ_{y;W}(A)| <= L(U Δ W)``
    * ``set``: ``|δ_{y;W}(A) - δ_{y;W}(B)| <= 2 L((A Δ B) ∩ (W ∪ (-y+W)))``
    * ``shift``: ``δ_{y;W}(A) - δ_{z;W}(A) <= δ_{0;-y+W}(A) - δ_{z-y;-y+W}(A)``
      (``z`` defaults to 0)
    """
    d = A.d
    cov = lambda S, v, V: local_covariogram(S, v, V, exact=True)  # noqa: E731
    k = as_lattice(y, A.n, d)
    kz = (0,) * d if z is None else as_lattice(z, A.n, d)
    ky = lambda t: tuple(Fraction(v, A.n) for v in t)  # noqa: E731
    window = BoundCheck(
        "window",
        abs(cov(A, ky(k), U) - cov(A, ky(k), W)),
        (U ^ W).volume(exact=True),
    )
    dom = domain_window(ky(k), W)
    setb = BoundCheck(
        "set",
        abs(cov(A, ky(k), W) - cov(B, ky(k), W)),
        2 * ((A ^ B) & dom).volume(exact=True),
    )
    Wy = translate_window(W, tuple(-v for v in k))
    shift = BoundCheck(
        "shift",
        cov(A, ky(k), W) - cov(A, ky(kz), W),
        cov(A, ky((0,) * d), Wy) - cov(A, ky(tuple(b - a for a, b in zip(k, kz))), Wy),
    )
    return ContinuityReport((window, setb, shift))
