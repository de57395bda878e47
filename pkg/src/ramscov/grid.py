"""Pixelized sets, pixel-aligned windows and grid-aligned shifts.

Every set lives on the lattice of closed cells ``C^n_k = k/n + [0, 1/n]^d``.
Sets and windows are stored as finite collections of integer cell indices, so
measures and translations are exact integer operations; conversion to floats
happens only when a value is reported.

A window is the open set ``int(closure(union of its cells))``.  Two windows
with the same cell set are therefore the same window, and the union of two
abutting boxes contains the face they share.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational
from typing import Iterable, Iterator, Sequence

import numpy as np

Cell = tuple[int, ...]

# float shifts are accepted when n*y is this close to an integer
_ALIGN_TOL = 1e-9


class GridError(ValueError):
    """Resolution/dimension mismatch or a shift that is not on the lattice."""


class FormatError(ValueError):
    """Malformed RAMS1/WIN1 text, with the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def as_lattice(y: Sequence | float | Fraction, n: int, d: int | None = None) -> Cell:
    """Convert a real shift ``y`` to integer lattice units ``n*y``.

    Components may be ints, Fractions, strings like ``"3/4"`` or floats.
    Raises :class:`GridError` when ``n*y`` is not an integer vector; refine
    the resolution in that case.
    """
    if isinstance(y, (int, float, Fraction, str)):
        y = (y,)
    out = []
    for comp in y:
        if isinstance(comp, str):
            comp = Fraction(comp)
        if isinstance(comp, Integral):
            out.append(int(comp) * n)
            continue
        if isinstance(comp, Rational):
            k = Fraction(comp) * n
            if k.denominator != 1:
                raise GridError(
                    f"shift component {comp} is not a multiple of 1/{n}; "
                    "refine the set to a resolution that divides it"
                )
            out.append(int(k))
            continue
        k = float(comp) * n
        r = round(k)
        if abs(k - r) > _ALIGN_TOL * max(1.0, abs(k)):
            raise GridError(
                f"shift component {comp!r} is not a multiple of 1/{n}; "
                "refine the set to a resolution that divides it"
            )
        out.append(int(r))
    if d is not None and len(out) != d:
        raise GridError(f"shift has dimension {len(out)}, expected {d}")
    return tuple(out)


def axis_shift(j: int, k: int, d: int) -> Cell:
    """Lattice vector ``k * e_j``."""
    v = [0] * d
    v[j] = k
    return tuple(v)


def _check_cells(cells: Iterable[Sequence[int]], d: int) -> frozenset[Cell]:
    out = frozenset(tuple(int(c) for c in k) for k in cells)
    for k in out:
        if len(k) != d:
            raise GridError(f"cell {k} does not have dimension {d}")
    return out


class _CellSet:
    """Shared behaviour of PixelSet and Window (resolution, dimension, cells)."""

    n: int
    d: int
    cells: frozenset[Cell]

    def __len__(self) -> int:
        return len(self.cells)

    def __iter__(self) -> Iterator[Cell]:
        return iter(sorted(self.cells))

    def __contains__(self, k) -> bool:
        return tuple(k) in self.cells

    def _compat(self, other: _CellSet) -> None:
        if self.n != other.n:
            raise GridError(f"resolution mismatch: n={self.n} vs n={other.n}")
        if self.d != other.d:
            raise GridError(f"dimension mismatch: d={self.d} vs d={other.d}")

    def count(self) -> int:
        return len(self.cells)

    def volume(self, exact: bool = False) -> float | Fraction:
        v = Fraction(len(self.cells), self.n**self.d)
        return v if exact else float(v)

    def bounds(self) -> tuple[Cell, Cell]:
        """Inclusive lower and exclusive upper cell bounds (empty set: zeros)."""
        if not self.cells:
            z = (0,) * self.d
            return z, z
        arr = np.array(sorted(self.cells), dtype=np.int64).reshape(-1, self.d)
        return tuple(int(v) for v in arr.min(0)), tuple(int(v) + 1 for v in arr.max(0))

    def to_array(self) -> np.ndarray:
        return np.array(sorted(self.cells), dtype=np.int64).reshape(-1, self.d)


@dataclass(frozen=True)
class PixelSet(_CellSet):
    """Finite union of closed cells at resolution ``n``."""

    n: int
    d: int
    cells: frozenset[Cell] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise GridError("resolution and dimension must be positive")
        object.__setattr__(self, "cells", _check_cells(self.cells, self.d))

    @classmethod
    def empty(cls, n: int, d: int) -> PixelSet:
        return cls(n, d, frozenset())

    @classmethod
    def from_mask(cls, mask: np.ndarray, n: int, origin: Sequence[int] | None = None) -> PixelSet:
        """Cells where ``mask`` is true; ``origin`` is the index of ``mask[0,...,0]``."""
        mask = np.asarray(mask, dtype=bool)
        origin = np.zeros(mask.ndim, dtype=np.int64) if origin is None else np.asarray(origin)
        idx = np.argwhere(mask) + origin
        return cls(n, mask.ndim, frozenset(map(tuple, idx.tolist())))

    def to_mask(self, lo: Sequence[int], hi: Sequence[int]) -> np.ndarray:
        """Boolean indicator on the cell box ``lo <= k < hi``."""
        shape = tuple(h - l for l, h in zip(lo, hi))
        mask = np.zeros(shape, dtype=bool)
        if self.cells:
            idx = self.to_array() - np.asarray(lo)
            ok = np.all((idx >= 0) & (idx < np.asarray(shape)), axis=1)
            mask[tuple(idx[ok].T)] = True
        return mask

    def __or__(self, other: PixelSet) -> PixelSet:
        self._compat(other)
        return PixelSet(self.n, self.d, self.cells | other.cells)

    def __and__(self, other: _CellSet) -> PixelSet:
        self._compat(other)
        return PixelSet(self.n, self.d, self.cells & other.cells)

    def __sub__(self, other: _CellSet) -> PixelSet:
        self._compat(other)
        return PixelSet(self.n, self.d, self.cells - other.cells)

    def __xor__(self, other: PixelSet) -> PixelSet:
        self._compat(other)
        return PixelSet(self.n, self.d, self.cells ^ other.cells)


@dataclass(frozen=True)
class Window(_CellSet):
    """Bounded pixel-aligned open window, identified with its set of cells.

    ``boxes`` keeps the boxes the window was built from (for serialization);
    equality and hashing use the cell set only.
    """

    n: int
    d: int
    cells: frozenset[Cell] = field(default_factory=frozenset)
    boxes: tuple[tuple[Cell, Cell], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise GridError("resolution and dimension must be positive")
        object.__setattr__(self, "cells", _check_cells(self.cells, self.d))

    @classmethod
    def box(cls, n: int, lo: Sequence[int], hi: Sequence[int]) -> Window:
        """Open box ``prod_i (lo_i/n, hi_i/n)``, bounds in cell units."""
        lo, hi = tuple(int(v) for v in lo), tuple(int(v) for v in hi)
        if len(lo) != len(hi):
            raise GridError("lo and hi have different dimensions")
        ranges = [range(a, b) for a, b in zip(lo, hi)]
        cells = frozenset(itertools.product(*ranges))
        return cls(n, len(lo), cells, ((lo, hi),))

    @classmethod
    def from_boxes(cls, n: int, boxes: Sequence[tuple[Sequence[int], Sequence[int]]]) -> Window:
        if not boxes:
            raise GridError("need at least one box (use Window.empty for the empty window)")
        parts = [cls.box(n, lo, hi) for lo, hi in boxes]
        cells = frozenset().union(*(p.cells for p in parts))
        return cls(n, parts[0].d, cells, tuple(b for p in parts for b in p.boxes))

    @classmethod
    def cube(cls, n: int, d: int, a, b) -> Window:
        """Open cube ``(a, b)^d`` with grid-aligned real bounds."""
        (lo,), (hi,) = as_lattice(a, n, 1), as_lattice(b, n, 1)
        return cls.box(n, (lo,) * d, (hi,) * d)

    @classmethod
    def unit(cls, n: int, d: int) -> Window:
        """The unit window ``(0,1)^d``."""
        return cls.box(n, (0,) * d, (n,) * d)

    @classmethod
    def empty(cls, n: int, d: int) -> Window:
        return cls(n, d, frozenset(), ())

    @classmethod
    def from_cells(cls, n: int, d: int, cells: Iterable[Sequence[int]]) -> Window:
        return cls(n, d, frozenset(tuple(k) for k in cells))

    def to_boxes(self) -> tuple[tuple[Cell, Cell], ...]:
        """Boxes covering exactly the cell set (recorded ones when available)."""
        if self.boxes is not None:
            return self.boxes
        # runs along the last axis
        out = []
        for k in sorted(self.cells):
            prev = k[:-1] + (k[-1] - 1,)
            if prev in self.cells:
                continue
            end = k[-1]
            while k[:-1] + (end + 1,) in self.cells:
                end += 1
            out.append((k, k[:-1] + (end,)))
        return tuple((lo, tuple(v + 1 for v in hi)) for lo, hi in out)

    def translate(self, y) -> Window:
        """``y + W`` for a grid-aligned shift (real units)."""
        return translate_window(self, as_lattice(y, self.n, self.d))

    def __or__(self, other: Window) -> Window:
        self._compat(other)
        return Window(self.n, self.d, self.cells | other.cells)

    def __and__(self, other: Window) -> Window:
        self._compat(other)
        return Window(self.n, self.d, self.cells & other.cells)

    def __xor__(self, other: Window) -> Window:
        self._compat(other)
        return Window(self.n, self.d, self.cells ^ other.cells)


def _shift_cells(cells: frozenset[Cell], k: Cell) -> frozenset[Cell]:
    if not any(k):
        return cells
    return frozenset(tuple(a + b for a, b in zip(c, k)) for c in cells)


def translate_window(W: Window, k: Cell) -> Window:
    """Window translated by the lattice vector ``k`` (cell units)."""
    boxes = None
    if W.boxes is not None:
        boxes = tuple(
            (tuple(a + b for a, b in zip(lo, k)), tuple(a + b for a, b in zip(hi, k)))
            for lo, hi in W.boxes
        )
    return Window(W.n, W.d, _shift_cells(W.cells, k), boxes)


def measure(A: PixelSet, W: Window | None = None, exact: bool = False) -> float | Fraction:
    """Lebesgue measure of ``A ∩ W`` (of ``A`` when ``W`` is None)."""
    if W is None:
        count = len(A.cells)
    else:
        A._compat(W)
        count = len(A.cells & W.cells)
    v = Fraction(count, A.n**A.d)
    return v if exact else float(v)


def translate(A: PixelSet, y) -> PixelSet:
    """``y + A`` for a grid-aligned shift ``y`` (real units)."""
    k = as_lattice(y, A.n, A.d)
    return PixelSet(A.n, A.d, _shift_cells(A.cells, k))


def translate_lattice(A: PixelSet, k: Cell) -> PixelSet:
    """``A`` translated by the lattice vector ``k`` (cell units)."""
    return PixelSet(A.n, A.d, _shift_cells(A.cells, tuple(k)))


def _segment_axis(k: Cell) -> tuple[int, int]:
    """Axis and signed length of an axis-aligned lattice vector."""
    nz = [i for i, v in enumerate(k) if v != 0]
    if len(nz) > 1:
        raise GridError(f"segment {k} is not axis-aligned")
    if not nz:
        return 0, 0
    return nz[0], k[nz[0]]


def erode_segment_lattice(W: Window, k: Cell) -> Window:
    """``{x : x + [0, k/n] ⊂ W}`` for an axis-aligned lattice vector ``k``."""
    j, m = _segment_axis(tuple(k))
    if m == 0:
        return W
    step = 1 if m > 0 else -1
    cells = W.cells
    keep = []
    for c in cells:
        ok = True
        for i in range(1, abs(m) + 1):
            nb = list(c)
            nb[j] += i * step
            if tuple(nb) not in cells:
                ok = False
                break
        if ok:
            keep.append(c)
    return Window(W.n, W.d, frozenset(keep))


def erode_segment(W: Window, u) -> Window:
    """Minkowski difference ``W ⊖ [0, u]`` for an axis-aligned grid shift ``u``."""
    return erode_segment_lattice(W, as_lattice(u, W.n, W.d))


def eroded_measure(W: Window, j: int, eps: float) -> float:
    """``L^d(W ⊖ [0, eps e_j])`` for any real ``eps``.

    Along axis ``j`` the window splits into maximal runs of cells; a run of
    length ``L`` contributes ``max(0, L - |eps|)`` times the cell cross-section.
    """
    n, d = W.n, W.d
    cross = Fraction(1, n ** (d - 1))
    total = 0.0
    for run in _runs_along(W.cells, j):
        total += max(0.0, run / n - abs(eps))
    return float(cross) * total


def _runs_along(cells: frozenset[Cell], j: int) -> Iterator[int]:
    """Lengths (in cells) of maximal runs of consecutive cells along axis ``j``."""
    for c in cells:
        prev = list(c)
        prev[j] -= 1
        if tuple(prev) in cells:
            continue
        length = 1
        nxt = list(c)
        while True:
            nxt[j] += 1
            if tuple(nxt) not in cells:
                break
            length += 1
        yield length


def refine_cells(cells: Iterable[Cell], m: int, d: int) -> frozenset[Cell]:
    offsets = list(itertools.product(range(m), repeat=d))
    return frozenset(
        tuple(m * a + o for a, o in zip(c, off)) for c in cells for off in offsets
    )


def refine(A: PixelSet, m: int) -> PixelSet:
    """Same set viewed at resolution ``n*m`` (each cell split into ``m^d``)."""
    if m < 1:
        raise GridError("refinement factor must be a positive integer")
    if m == 1:
        return A
    return PixelSet(A.n * m, A.d, refine_cells(A.cells, m, A.d))


def refine_window(W: Window, m: int) -> Window:
    if m < 1:
        raise GridError("refinement factor must be a positive integer")
    if m == 1:
        return W
    boxes = None
    if W.boxes is not None:
        boxes = tuple(
            (tuple(m * v for v in lo), tuple(m * v for v in hi)) for lo, hi in W.boxes
        )
    return Window(W.n * m, W.d, refine_cells(W.cells, m, W.d), boxes)


def random_pixelset(rng: np.random.Generator, n: int, shape: Sequence[int],
                    p: float = 0.5, origin: Sequence[int] | None = None) -> PixelSet:
    """Bernoulli(p) cells on a box of the given shape."""
    mask = rng.random(tuple(shape)) < p
    return PixelSet.from_mask(mask, n, origin)


# ---------------------------------------------------------------- text formats

_HEADER = re.compile(r"^(RAMS1|WIN1)\s+(.*)$")


def _parse_kv(text: str, lineno: int) -> dict[str, str]:
    out = {}
    for tok in text.split():
        if "=" not in tok:
            raise FormatError(f"expected key=value, got {tok!r}", lineno)
        key, val = tok.split("=", 1)
        out[key] = val
    return out


def _parse_int(val: str, what: str, lineno: int) -> int:
    try:
        return int(val)
    except ValueError:
        raise FormatError(f"{what} must be an integer, got {val!r}", lineno) from None


def dumps_pixelset(A: PixelSet) -> str:
    lines = [f"RAMS1 d={A.d} n={A.n}"]
    lines += [" ".join(str(v) for v in k) for k in sorted(A.cells)]
    return "\n".join(lines) + "\n"


def loads_pixelset(text: str) -> PixelSet:
    header = None
    cells: dict[Cell, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if header is None:
            m = _HEADER.match(line)
            if not m or m.group(1) != "RAMS1":
                raise FormatError("expected header 'RAMS1 d=<d> n=<n>'", lineno)
            kv = _parse_kv(m.group(2), lineno)
            if "d" not in kv or "n" not in kv:
                raise FormatError("header needs d= and n=", lineno)
            d = _parse_int(kv["d"], "d", lineno)
            n = _parse_int(kv["n"], "n", lineno)
            if d < 1 or n < 1:
                raise FormatError("d and n must be positive", lineno)
            header = (d, n)
            continue
        toks = line.split()
        if len(toks) != header[0]:
            raise FormatError(f"expected {header[0]} integers, got {len(toks)}", lineno)
        cell = tuple(_parse_int(t, "cell index", lineno) for t in toks)
        if cell in cells:
            raise FormatError(f"duplicate cell (first on line {cells[cell]})", lineno)
        cells[cell] = lineno
    if header is None:
        raise FormatError("missing RAMS1 header")
    d, n = header
    return PixelSet(n, d, frozenset(cells))


def dumps_window(W: Window) -> str:
    lines = []
    for lo, hi in W.to_boxes():
        lines.append(
            f"WIN1 d={W.d} n={W.n} lo={','.join(map(str, lo))} hi={','.join(map(str, hi))}"
        )
    if not lines:
        lines.append(f"WIN1 d={W.d} n={W.n} lo={','.join('0' * W.d)} hi={','.join('0' * W.d)}")
    return "\n".join(lines) + "\n"


def loads_window(text: str) -> Window:
    boxes = []
    dn = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _HEADER.match(line)
        if not m or m.group(1) != "WIN1":
            raise FormatError("expected 'WIN1 d=<d> n=<n> lo=<ints> hi=<ints>'", lineno)
        kv = _parse_kv(m.group(2), lineno)
        for key in ("d", "n", "lo", "hi"):
            if key not in kv:
                raise FormatError(f"missing {key}=", lineno)
        d = _parse_int(kv["d"], "d", lineno)
        n = _parse_int(kv["n"], "n", lineno)
        if dn is not None and dn != (d, n):
            raise FormatError("all boxes must share d and n", lineno)
        dn = (d, n)
        lo = tuple(_parse_int(v, "lo", lineno) for v in kv["lo"].split(","))
        hi = tuple(_parse_int(v, "hi", lineno) for v in kv["hi"].split(","))
        if len(lo) != d or len(hi) != d:
            raise FormatError(f"lo/hi must have {d} components", lineno)
        if any(b < a for a, b in zip(lo, hi)):
            raise FormatError("hi must be >= lo", lineno)
        boxes.append((lo, hi))
    if dn is None:
        raise FormatError("no WIN1 lines")
    d, n = dn
    boxes = [b for b in boxes if all(h > l for l, h in zip(*b))]
    if not boxes:
        return Window.empty(n, d)
    return Window.from_boxes(n, boxes)
