"""Covariogram functionals, their exact minimization, and S2 screening.

A functional ``g = c + Σ_i a_i δ_{y_i;W_i}`` with grid-aligned data is a
quadratic form in the cell indicator vector of a pixel set::

    g(A) = c + Σ_{k,l ∈ I_A} β_{k,l},
    β_{k,l} = n^{-d} Σ_i a_i 1(l = k - n y_i) 1(C_k ⊂ closure(W_i)).

Its infimum over all measurable sets is attained on a pixel set (the extreme
points of the correlation polytope are deterministic 0/1 configurations), so
minimizing over the ``2^N`` subsets of the domain cells is exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np

from .covariogram import (
    U_np_window,
    U_window,
    beta_tail,
    beta_weight,
    covariogram_count,
)
from .grid import (
    Cell,
    GridError,
    PixelSet,
    Window,
    as_lattice,
    axis_shift,
    eroded_measure,
    erode_segment_lattice,
    refine_window,
    translate_window,
)

DEFAULT_BUDGET = 2**24


# ----------------------------------------------------------------- functionals

@dataclass(frozen=True)
class Term:
    a: float | int | Fraction
    k: Cell  # shift in lattice units: y = k / n
    W: Window


@dataclass(frozen=True)
class Functional:
    """``c + Σ a_i δ_{k_i/n; W_i}`` with pixel-aligned windows at resolution ``n``."""

    n: int
    d: int
    c: float | int | Fraction = 0
    terms: tuple[Term, ...] = ()

    def __post_init__(self):
        for t in self.terms:
            if t.W.n != self.n or t.W.d != self.d:
                raise GridError("term window does not match the functional's resolution")
            if len(t.k) != self.d:
                raise GridError("term shift has the wrong dimension")

    @classmethod
    def build(cls, n: int, d: int, c=0, terms: Iterable[tuple] = ()) -> Functional:
        """Terms given as ``(a, y, W)`` with real grid-aligned shifts ``y``."""
        return cls(n, d, c, tuple(Term(a, as_lattice(y, n, d), W) for a, y, W in terms))

    @classmethod
    def delta(cls, k: Cell, W: Window, a=1) -> Functional:
        return cls(W.n, W.d, 0, (Term(a, tuple(k), W),))

    @property
    def is_rational(self) -> bool:
        return isinstance(self.c, Rational) and all(isinstance(t.a, Rational) for t in self.terms)

    def domain(self) -> Window:
        """Pixel-aligned window containing ``dom(g)``: ``∪_i W_i ∪ (-y_i + W_i)``."""
        cells: set[Cell] = set()
        for t in self.terms:
            cells |= t.W.cells
            cells |= translate_window(t.W, tuple(-v for v in t.k)).cells
        return Window(self.n, self.d, frozenset(cells))

    def __call__(self, A: PixelSet):
        """``g(A)`` through local covariograms (exact when coefficients are rational)."""
        if A.n != self.n:
            raise GridError(f"set has resolution {A.n}, functional has {self.n}")
        scale = self.n**self.d
        if self.is_rational:
            val = Fraction(self.c)
            for t in self.terms:
                val += Fraction(t.a) * Fraction(covariogram_count(A, t.k, t.W), scale)
            return val
        parts = [float(self.c)]
        parts += [float(t.a) * covariogram_count(A, t.k, t.W) / scale for t in self.terms]
        return math.fsum(parts)

    def refine(self, m: int) -> Functional:
        """Same functional expressed at resolution ``n*m``."""
        terms = tuple(Term(t.a, tuple(m * v for v in t.k), refine_window(t.W, m)) for t in self.terms)
        return Functional(self.n * m, self.d, self.c, terms)

    def __add__(self, other) -> Functional:
        if not isinstance(other, Functional):
            return Functional(self.n, self.d, self.c + other, self.terms)
        if self.d != other.d:
            raise GridError("dimension mismatch")
        if self.n != other.n:
            n = math.lcm(self.n, other.n)
            return self.refine(n // self.n) + other.refine(n // other.n)
        return Functional(self.n, self.d, self.c + other.c, self.terms + other.terms)

    __radd__ = __add__

    def __mul__(self, s) -> Functional:
        return Functional(self.n, self.d, self.c * s, tuple(Term(t.a * s, t.k, t.W) for t in self.terms))

    __rmul__ = __mul__

    def __neg__(self) -> Functional:
        return self * -1

    def __sub__(self, other) -> Functional:
        return self + (-other if isinstance(other, Functional) else -other)

    def to_dict(self) -> dict:
        def win(W: Window):
            boxes = W.to_boxes()
            if len(boxes) == 1:
                return {"lo": list(boxes[0][0]), "hi": list(boxes[0][1])}
            return {"boxes": [{"lo": list(lo), "hi": list(hi)} for lo, hi in boxes]}

        def num(x):
            if isinstance(x, Fraction):
                return x.numerator if x.denominator == 1 else str(x)
            return x

        return {
            "c": num(self.c),
            "n": self.n,
            "d": self.d,
            "terms": [
                {"a": num(t.a), "y": [str(Fraction(v, self.n)) if v % self.n else v // self.n for v in t.k],
                 "W": win(t.W)}
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Functional:
        n = int(obj["n"])
        terms = obj.get("terms", [])
        if "d" in obj:
            d = int(obj["d"])
        elif terms:
            d = len(terms[0]["y"])
        else:
            raise ValueError("functional without terms needs 'd'")

        def num(x):
            if isinstance(x, str):
                return Fraction(x)
            return x

        def win(w: dict) -> Window:
            if "boxes" in w:
                boxes = [(b["lo"], b["hi"]) for b in w["boxes"]]
                return Window.from_boxes(n, boxes) if boxes else Window.empty(n, d)
            return Window.box(n, w["lo"], w["hi"])

        out = []
        for t in terms:
            out.append(Term(num(t["a"]), as_lattice(t["y"], n, d), win(t["W"])))
        return cls(n, d, num(obj.get("c", 0)), tuple(out))


def sigma_functional(k: Cell, W: Window) -> Functional:
    """``σ_{k/n;W}`` as a functional (four covariogram terms)."""
    k = tuple(k)
    norm = Fraction(max(abs(v) for v in k), W.n)
    if norm == 0 or sum(1 for v in k if v) != 1:
        raise GridError("sigma needs a nonzero axis-aligned shift")
    mk = tuple(-v for v in k)
    zero = (0,) * W.d
    Wm = erode_segment_lattice(W, mk)
    Wp = erode_segment_lattice(W, k)
    inv = 1 / norm
    terms = (Term(inv, zero, Wm), Term(-inv, k, Wm), Term(inv, zero, Wp), Term(-inv, mk, Wp))
    return Functional(W.n, W.d, 0, terms)


def g_np_functional(n: int, p: int, d: int) -> Functional:
    """The weighted-perimeter surrogate ``g_{n,p}`` as an element of ``G_n``."""
    g = Functional(n, d)
    for m in range(1, p + 1):
        for j in range(d):
            g = g + beta_weight(m, d) * sigma_functional(axis_shift(j, 1, d), U_window(m, n, d))
    tail, _ = beta_tail(p, d)
    for j in range(d):
        g = g + tail * sigma_functional(axis_shift(j, 1, d), U_np_window(n, p, d))
    return g


# ---------------------------------------------------------------- beta matrix

@dataclass(frozen=True)
class BetaMatrix:
    """Sparse coefficients ``β_{k,l}`` over the domain cells ``index``."""

    n: int
    d: int
    c: float | Fraction
    index: tuple[Cell, ...]
    coef: dict[tuple[Cell, Cell], float | Fraction]

    def dense(self) -> np.ndarray:
        pos = {k: i for i, k in enumerate(self.index)}
        Q = np.zeros((len(self.index), len(self.index)))
        for (k, l), v in self.coef.items():
            Q[pos[k], pos[l]] += float(v)
        return Q

    def value(self, A: PixelSet):
        """``c + Σ_{k,l ∈ I_A} β_{k,l}`` (exact for rational coefficients)."""
        cells = A.cells
        total = self.c
        for (k, l), v in self.coef.items():
            if k in cells and l in cells:
                total = total + v
        return total

    def __add__(self, other: BetaMatrix) -> BetaMatrix:
        if (self.n, self.d) != (other.n, other.d):
            raise GridError("resolution mismatch")
        coef = dict(self.coef)
        for key, v in other.coef.items():
            coef[key] = coef.get(key, 0) + v
        index = tuple(sorted(set(self.index) | set(other.index)))
        return BetaMatrix(self.n, self.d, self.c + other.c, index, coef)


def beta_matrix(g: Functional) -> BetaMatrix:
    exact = g.is_rational
    scale = Fraction(1, g.n**g.d) if exact else 1.0 / g.n**g.d
    coef: dict[tuple[Cell, Cell], float | Fraction] = {}
    for t in g.terms:
        a = Fraction(t.a) if exact else float(t.a)
        for k in t.W.cells:
            l = tuple(x - y for x, y in zip(k, t.k))
            coef[(k, l)] = coef.get((k, l), 0) + a * scale
    coef = {key: v for key, v in coef.items() if v != 0}
    c = Fraction(g.c) if exact else float(g.c)
    return BetaMatrix(g.n, g.d, c, tuple(sorted(g.domain().cells)), coef)


# ------------------------------------------------------------- minimization

@dataclass(frozen=True)
class MinimizeResult:
    value: float | Fraction
    argmin: PixelSet
    exact: bool
    evaluated: int


def _integer_form(g: Functional, B: BetaMatrix) -> tuple[np.ndarray, int] | None:
    """Integer matrix and common denominator when all coefficients are rational."""
    if not g.is_rational:
        return None
    den = 1
    for v in B.coef.values():
        den = math.lcm(den, Fraction(v).denominator)
    pos = {k: i for i, k in enumerate(B.index)}
    N = len(B.index)
    Q = np.zeros((N, N), dtype=np.float64)
    total = 0
    for (k, l), v in B.coef.items():
        iv = int(Fraction(v) * den)
        Q[pos[k], pos[l]] += iv
        total += abs(iv)
    if total >= 2**52:
        return None
    return Q, den


def _block_scores(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic score of every pattern of a block, by Gray-code increments.

    Pattern integer ``p`` has cell ``i`` at bit ``b-1-i`` (cell 0 most
    significant).  Returns ``scores[p]`` and the 0/1 matrix ``Z[p, i]``.
    """
    b = Q.shape[0]
    size = 1 << b
    scores = np.zeros(size)
    S = Q + Q.T
    z = np.zeros(b)
    r = np.zeros(b)
    score = 0.0
    prev = 0
    for i in range(1, size):
        gray = i ^ (i >> 1)
        bit = (gray ^ prev).bit_length() - 1
        t = b - 1 - bit
        if z[t]:
            score -= r[t] - Q[t, t]
            z[t] = 0.0
            r -= S[:, t]
        else:
            score += Q[t, t] + r[t]
            z[t] = 1.0
            r += S[:, t]
        scores[gray] = score
        prev = gray
    pats = np.arange(size, dtype=np.int64)
    Z = ((pats[:, None] >> (b - 1 - np.arange(b))[None, :]) & 1).astype(np.float64)
    return scores, Z


def _lex_first(pats: np.ndarray, N: int) -> int:
    """Pattern whose sorted cell-index list is lexicographically smallest.

    Bit ``N-1-i`` of a pattern is cell ``i``.  A proper prefix sorts first,
    so the empty set beats everything and ``{0}`` beats ``{0, 1}``.
    """
    cand = np.unique(pats)
    free = (1 << N) - 1  # cells after the prefix chosen so far
    while len(cand) > 1:
        rest = cand & free
        done = cand[rest == 0]
        if len(done):
            return int(done[0])
        top = np.frexp(rest.astype(np.float64))[1] - 1  # highest bit = lowest cell
        t = int(top.max())
        cand = cand[top == t]
        free = (1 << t) - 1
    return int(cand[0])


def _enumerate_min(Q: np.ndarray, tol: float) -> tuple[float, int]:
    """Exact minimum of ``z^T Q z`` over ``z ∈ {0,1}^N`` and a minimizing pattern.

    Among ties the pattern with the lexicographically smallest index set wins.
    """
    N = Q.shape[0]
    if N == 0:
        return 0.0, 0
    h = N // 2
    l = N - h
    Qh, Ql = Q[:h, :h], Q[h:, h:]
    C = Q[:h, h:] + Q[h:, :h].T
    sh, Zh = _block_scores(Qh) if h else (np.zeros(1), np.zeros((1, 0)))
    sl, Zl = _block_scores(Ql)
    V = Zh @ C  # (2^h, l)
    best = math.inf
    ties: list[int] = []
    rows = max(1, (1 << 22) >> l)
    for start in range(0, len(sh), rows):
        stop = min(len(sh), start + rows)
        block = sh[start:stop, None] + sl[None, :] + V[start:stop] @ Zl.T
        m = float(block.min())
        if m > best + tol:
            continue
        flat = np.flatnonzero(block.ravel() <= m + tol)
        pats = ((start + flat // block.shape[1]) << l) | (flat % block.shape[1])
        winner = _lex_first(pats.astype(np.int64), N)
        if m < best - tol:
            best, ties = m, [winner]
        else:
            ties.append(winner)
    return best, _lex_first(np.array(ties, dtype=np.int64), N)


def _local_search(Q: np.ndarray) -> tuple[float, np.ndarray]:
    """Greedy descent with single flips from a few deterministic starts."""
    N = Q.shape[0]
    S = Q + Q.T
    best_val, best_z = math.inf, np.zeros(N)
    for start in (np.zeros(N), np.ones(N)):
        z = start.copy()
        val = float(z @ Q @ z)
        improved = True
        while improved:
            improved = False
            r = S @ z
            for t in range(N):
                if z[t]:
                    delta = -(r[t] - Q[t, t])
                else:
                    delta = Q[t, t] + r[t]
                if delta < -1e-15:
                    z[t] = 1.0 - z[t]
                    val += delta
                    r = S @ z
                    improved = True
        if val < best_val:
            best_val, best_z = val, z
    return best_val, best_z


def minimize_functional(g: Functional, budget: int = DEFAULT_BUDGET, tol: float = 1e-12) -> MinimizeResult:
    """Global minimum of ``g`` over all measurable sets, with a minimizing pixel set.

    When ``2^N <= budget`` (``N`` domain cells) every subset is scored and the
    result is exact; ties go to the lexicographically smallest index set,
    with cells indexed in sorted lattice order.  Otherwise a local search result is returned with
    ``exact=False``; its value is only an upper bound on the minimum.
    """
    B = beta_matrix(g)
    N = len(B.index)
    if N == 0:
        return MinimizeResult(B.c, PixelSet.empty(g.n, g.d), True, 1)
    integer = _integer_form(g, B)
    if integer is not None:
        Q, den = integer
        tol_e = 0.0
    else:
        Q, den, tol_e = B.dense(), None, tol
    if (1 << N) <= budget:
        m, pat = _enumerate_min(Q, tol_e)
        chosen = [B.index[i] for i in range(N) if (pat >> (N - 1 - i)) & 1]
        exact, evaluated = True, 1 << N
    else:
        m, z = _local_search(Q)
        chosen = [B.index[i] for i in range(N) if z[i]]
        exact, evaluated = False, 0
    argmin = PixelSet(g.n, g.d, frozenset(chosen))
    if den is not None:
        value = B.c + Fraction(int(round(m)), den)
    else:
        value = float(B.c) + m
    return MinimizeResult(value, argmin, exact, evaluated)


@dataclass(frozen=True)
class NonnegativityResult:
    status: str  # "certified" | "witness" | "inconclusive"
    min_value: float | Fraction
    witness: PixelSet | None
    exact: bool


def is_nonnegative(g: Functional, budget: int = DEFAULT_BUDGET, tol: float = 0.0) -> NonnegativityResult:
    """Decide ``g(A) >= 0`` for every measurable ``A``.

    The answer is sound both ways when enumeration fits in ``budget``.  A
    negative value found by local search is still a valid witness; a
    nonnegative local-search result is reported as inconclusive.
    """
    res = minimize_functional(g, budget)
    if res.value < -tol:
        return NonnegativityResult("witness", res.value, res.argmin, res.exact)
    if res.exact:
        return NonnegativityResult("certified", res.value, None, True)
    return NonnegativityResult("inconclusive", res.value, None, False)


# ------------------------------------------------------------------ S2 curves

def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass
class S2Curve:
    """Candidate specific covariogram sampled on ``{-K h, ..., K h}^d``.

    ``values`` has shape ``(2K+1,)*d`` with the origin at index ``K``.  An
    optional ``callback`` (vectorized, ``(N, d) -> (N,)``) serves shifts that
    fall off the lattice.
    """

    d: int
    h: Fraction
    values: np.ndarray
    stderr: np.ndarray | None = None
    callback: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    normalized: bool = True
    label: str = ""

    def __post_init__(self):
        self.h = _as_fraction(self.h)
        if self.h <= 0:
            raise ValueError("lattice step must be positive")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.d or len(set(self.values.shape)) != 1 or self.values.shape[0] % 2 == 0:
            raise ValueError("values must have shape (2K+1,)*d")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("S2 samples must be finite")
        if self.stderr is not None:
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.values.shape:
                raise ValueError("stderr must match values")

    @property
    def K(self) -> int:
        return (self.values.shape[0] - 1) // 2

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], d: int, h, K: int,
                      keep_callback: bool = True, **kw) -> S2Curve:
        hf = _as_fraction(h)
        grid = np.array(list(itertools.product(range(-K, K + 1), repeat=d)), dtype=float) * float(hf)
        vals = np.asarray(f(grid), dtype=float).reshape((2 * K + 1,) * d)
        return cls(d, hf, vals, callback=f if keep_callback else None, **kw)

    def at_index(self, m: Sequence[int]) -> float:
        return float(self.values[tuple(v + self.K for v in m)])

    def se_at_index(self, m: Sequence[int]) -> float:
        if self.stderr is None:
            return 0.0
        return float(self.stderr[tuple(v + self.K for v in m)])

    @property
    def origin(self) -> float:
        return self.at_index((0,) * self.d)

    def lattice_index(self, y: Sequence[Fraction]) -> tuple[int, ...] | None:
        """Sample index of the exact shift ``y``, or None when not sampled."""
        out = []
        for v in y:
            q = _as_fraction(v) / self.h
            if q.denominator != 1 or abs(q) > self.K:
                return None
            out.append(int(q))
        return tuple(out)

    def value(self, y: Sequence) -> float:
        """``S2(y)``; off-lattice shifts need the callback (no interpolation)."""
        m = self.lattice_index(y)
        if m is not None:
            return self.at_index(m)
        if self.callback is not None:
            return float(np.asarray(self.callback(np.array([[float(v) for v in y]])))[0])
        raise GridError(f"S2 curve has no sample at y={tuple(str(v) for v in y)} and no callback")

    def stderr_at(self, y: Sequence) -> float:
        m = self.lattice_index(y)
        return 0.0 if m is None else self.se_at_index(m)

    def supports(self, y: Sequence) -> bool:
        return self.callback is not None or self.lattice_index(y) is not None

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "h": str(self.h),
            "K": self.K,
            "values": [float(v) for v in self.values.ravel()],
            "normalized": self.normalized,
        }
        if self.stderr is not None:
            out["stderr"] = [float(v) for v in self.stderr.ravel()]
        if self.label:
            out["label"] = self.label
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> S2Curve:
        d = int(obj.get("d", 1))
        h = obj["h"]
        h = Fraction(h) if isinstance(h, str) else _as_fraction(h)
        vals = np.asarray(obj["values"], dtype=float)
        # K defaults to the value implied by the sample count
        K = int(obj["K"]) if "K" in obj else int(round((vals.size ** (1 / d) - 1) / 2))
        shape = (2 * K + 1,) * d
        if vals.size != (2 * K + 1) ** d:
            raise ValueError(f"expected {(2 * K + 1) ** d} values, got {vals.size}")
        se = obj.get("stderr")
        se = None if se is None else np.asarray(se, dtype=float).reshape(shape)
        return cls(d, h, vals.reshape(shape), se, None, bool(obj.get("normalized", True)),
                   obj.get("label", ""))


def apply_to_s2(g: Functional, s2: S2Curve) -> float:
    """``Φ(g) = c + Σ a_i S2(y_i) L^d(W_i)`` under the stationary ansatz."""
    if g.d != s2.d:
        raise GridError("dimension mismatch between functional and S2 curve")
    parts = [float(g.c)]
    for t in g.terms:
        y = tuple(Fraction(v, g.n) for v in t.k)
        parts.append(float(t.a) * s2.value(y) * t.W.volume())
    return math.fsum(parts)


def _phi_slack(g: Functional, s2: S2Curve, nsigma: float) -> float:
    if s2.stderr is None or nsigma <= 0:
        return 0.0
    total = 0.0
    for t in g.terms:
        y = tuple(Fraction(v, g.n) for v in t.k)
        total += abs(float(t.a)) * s2.stderr_at(y) * t.W.volume()
    return nsigma * total


# ------------------------------------------------------ necessary conditions

@dataclass(frozen=True)
class Violation:
    kind: str
    points: tuple  # real shifts involved
    amount: float  # how far the inequality is broken

    def to_dict(self) -> dict:
        return {"kind": self.kind, "points": [list(p) for p in self.points], "amount": self.amount}


def _pt(s2: S2Curve, m) -> tuple[float, ...]:
    return tuple(float(v * s2.h) for v in m)


def necessary_conditions(s2: S2Curve, tol: float = 1e-12, nsigma: float = 3.0) -> list[Violation]:
    """Pointwise necessary conditions for a specific covariogram on the sample lattice.

    Checks ``0 <= S2(y) <= S2(0)`` (and ``S2(0) <= 1`` when normalized),
    evenness, and ``|S2(y) - S2(z)| <= S2(0) - S2(y - z)`` for every sampled
    pair whose difference is sampled.  With standard errors present each
    comparison gets ``nsigma`` times the summed errors as slack.
    """
    v = s2.values
    K, d = s2.K, s2.d
    se = s2.stderr if s2.stderr is not None else np.zeros_like(v)
    ks = nsigma if s2.stderr is not None else 0.0
    ctr = (K,) * d
    s0, se0 = float(v[ctr]), float(se[ctr])
    out: list[Violation] = []
    idx = list(itertools.product(range(-K, K + 1), repeat=d))

    def at(a, m):
        return float(a[tuple(x + K for x in m)])

    if s2.normalized and s0 > 1 + tol + ks * se0:
        out.append(Violation("origin_above_one", (_pt(s2, (0,) * d),), s0 - 1))
    for m in idx:
        val, e = at(v, m), at(se, m)
        if val < -tol - ks * e:
            out.append(Violation("negative", (_pt(s2, m),), -val))
        if val > s0 + tol + ks * (e + se0):
            out.append(Violation("exceeds_origin", (_pt(s2, m),), val - s0))
        neg = tuple(-x for x in m)
        if m < neg:
            gap = abs(val - at(v, neg))
            if gap > tol + ks * (e + at(se, neg)):
                out.append(Violation("odd", (_pt(s2, m), _pt(s2, neg)), gap))
    # triangle bound, one slice pair per difference vector
    full = 2 * K + 1
    for delta in idx:
        if not any(delta):
            continue
        rhs = s0 - at(v, delta)
        rhs_se = se0 + at(se, delta)
        ys = tuple(slice(max(0, dl), min(full, full + dl)) for dl in delta)
        zs = tuple(slice(s.start - dl, s.stop - dl) for s, dl in zip(ys, delta))
        lhs = np.abs(v[ys] - v[zs])
        slack = tol + ks * (rhs_se + se[ys] + se[zs])
        bad = lhs - rhs > slack
        if not np.any(bad):
            continue
        for pos in np.argwhere(bad):
            y = tuple(int(p) + s.start - K for p, s in zip(pos, ys))
            z = tuple(a - b for a, b in zip(y, delta))
            amount = float(lhs[tuple(pos)] - rhs)
            out.append(Violation("triangle", (_pt(s2, y), _pt(s2, z)), amount))
    return out


# ------------------------------------------------------ Lipschitz constants

@dataclass(frozen=True)
class LipschitzEstimate:
    sup: float  # max over sampled t of (S2(0) - S2(t e_j)) / |t|
    sup_t: float
    smallest_t_quotient: float  # quotient at t = ±h (mean of both signs)
    diverging: bool  # quotient still growing fast as t -> 0


def lipschitz_at_zero(s2: S2Curve, j: int = 0) -> LipschitzEstimate:
    """Lattice estimate of ``Lip_j(S2, 0) = sup_t (S2(0) - S2(t e_j)) / |t|``."""
    K, d = s2.K, s2.d
    if K == 0:
        return LipschitzEstimate(0.0, 0.0, 0.0, False)
    s0 = s2.origin
    h = float(s2.h)
    best, best_t = -math.inf, 0.0
    for m in range(1, K + 1):
        for sgn in (1, -1):
            t = sgn * m
            q = (s0 - s2.at_index(axis_shift(j, t, d))) / (m * h)
            if q > best:
                best, best_t = q, t * h
    q1 = 0.5 * sum((s0 - s2.at_index(axis_shift(j, s, d))) / h for s in (1, -1))
    diverging = False
    if K >= 2:
        q2 = 0.5 * sum((s0 - s2.at_index(axis_shift(j, 2 * s, d))) / (2 * h) for s in (1, -1))
        diverging = q1 > 0 and q1 > 1.25 * q2
    return LipschitzEstimate(max(best, 0.0), best_t, q1, diverging)


@dataclass(frozen=True)
class LConstant:
    value: float
    argmax_eps: float


def sigma_gamma(s2: S2Curve, j: int, W: Window, eps) -> float:
    """``σ_γ(ε e_j; W)`` for the stationary form ``γ(y; W) = S2(y) L^d(W)``."""
    e = _as_fraction(eps)
    if e == 0:
        raise ValueError("eps must be nonzero")
    d = s2.d
    plus = tuple(e if i == j else Fraction(0) for i in range(d))
    minus = tuple(-v for v in plus)
    s0 = s2.value((Fraction(0),) * d)
    vol = eroded_measure(W, j, float(e))  # same for [-εe_j,0] and [0,εe_j]
    return vol * ((s0 - s2.value(plus)) + (s0 - s2.value(minus))) / abs(float(e))


def L_constant(s2: S2Curve, j: int, W: Window, eps_grid: Iterable | None = None) -> LConstant:
    """``L_j(γ, W) = sup_ε σ_γ(ε e_j; W)`` over a finite ε grid (lattice multiples by default)."""
    if eps_grid is None:
        eps_grid = [m * s2.h for m in range(1, s2.K + 1)]
    best, arg = 0.0, 0.0
    for e in eps_grid:
        val = sigma_gamma(s2, j, W, e)
        if val > best:
            best, arg = val, float(e)
    return LConstant(best, arg)


# --------------------------------------------------- realisability screening

@dataclass(frozen=True)
class Scale:
    n: int
    window: Window

    def to_dict(self) -> dict:
        return {"n": self.n, "cells": len(self.window), "boxes": [
            {"lo": list(lo), "hi": list(hi)} for lo, hi in self.window.to_boxes()]}


def scale_box(n: int, d: int, side_cells: int) -> Scale:
    """Scale ``n`` with window ``(0, side/n)^d``."""
    return Scale(n, Window.box(n, (0,) * d, (side_cells,) * d))


@dataclass(frozen=True)
class ProbeOutcome:
    family: str
    functional: Functional
    min_value: float
    exact: bool
    phi: float
    slack: float

    @property
    def violated(self) -> bool:
        return self.exact and self.min_value >= 0 and self.phi < -self.slack

    def to_dict(self) -> dict:
        return {
            "kind": "functional",
            "family": self.family,
            "functional": self.functional.to_dict(),
            "min_over_sets": float(self.min_value),
            "min_exact": self.exact,
            "phi": self.phi,
        }


@dataclass
class RealisabilityReport:
    verdict: str  # "REJECTED" | "CONSISTENT"
    violations: list[Violation]
    probe_witnesses: list[ProbeOutcome]
    lipschitz: list[LipschitzEstimate]
    per_s_lower_bound: float
    scales_tested: list[Scale]
    probe_families: dict[str, int]
    probes_skipped: int = 0
    label: str = ""

    @property
    def rejected(self) -> bool:
        return self.verdict == "REJECTED"

    def to_dict(self, max_witnesses: int = 20) -> dict:
        viol = sorted(self.violations, key=lambda v: -v.amount)
        witnesses = [v.to_dict() | {"kind": v.kind} for v in viol[:max_witnesses]]
        witnesses += [p.to_dict() for p in sorted(self.probe_witnesses, key=lambda p: p.phi)[:max_witnesses]]
        return {
            "verdict": self.verdict,
            "label": self.label,
            "witnesses": witnesses,
            "violation_count": len(self.violations),
            "functional_witness_count": len(self.probe_witnesses),
            "lipschitz": [
                {"axis": j, "sup": e.sup, "sup_t": e.sup_t,
                 "smallest_t_quotient": e.smallest_t_quotient, "diverging": e.diverging}
                for j, e in enumerate(self.lipschitz)
            ],
            "per_s_lower_bound": self.per_s_lower_bound,
            "scales_tested": [s.to_dict() for s in self.scales_tested],
            "probe_families": self.probe_families,
            "probes_skipped": self.probes_skipped,
            "scope": (
                "CONSISTENT means no tested necessary condition failed at these scales; "
                "no realizing random set is constructed."
            ),
        }


def _lattice_shifts(d: int, kmax: int) -> list[Cell]:
    return [k for k in itertools.product(range(-kmax, kmax + 1), repeat=d) if any(k)]


def _structured_probes(scale: Scale, kmax: int) -> Iterable[tuple[str, Functional]]:
    n, W, d = scale.n, scale.window, scale.window.d
    zero = (0,) * d
    for k in _lattice_shifts(d, kmax):
        yield "difference", Functional(n, d, 0, (Term(1, zero, W), Term(-1, k, W)))
    # triangle functionals on a single cell
    cell = Window.box(n, zero, (1,) * d)
    shifts = _lattice_shifts(d, kmax)
    for ky in shifts:
        Wy = translate_window(cell, tuple(-v for v in ky))
        for kz in shifts:
            if kz == ky:
                continue
            kzy = tuple(b - a for a, b in zip(ky, kz))
            yield "triangle", Functional(n, d, 0, (
                Term(1, zero, Wy), Term(-1, kzy, Wy), Term(-1, ky, cell), Term(1, kz, cell)))
    for j in range(d):
        u = axis_shift(j, 1, d)
        u2 = axis_shift(j, 2, d)
        if len(erode_segment_lattice(W, u2)) == 0:
            continue
        yield "sigma_dyadic", sigma_functional(u, W) - sigma_functional(u2, W)
    yield "g_np", g_np_functional(n, 1, d)


def _random_probe(rng: np.random.Generator, scale: Scale, kmax: int) -> Functional:
    n, W, d = scale.n, scale.window, scale.window.d
    lo, hi = W.bounds()
    q = int(rng.integers(2, 5))
    terms = []
    for _ in range(q):
        a = int(rng.choice([-3, -2, -1, 1, 2, 3]))
        k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=d))
        blo, bhi = [], []
        for a_, b_ in zip(lo, hi):
            x0 = int(rng.integers(a_, b_))
            x1 = int(rng.integers(x0 + 1, b_ + 1))
            blo.append(x0)
            bhi.append(x1)
        box = Window.box(n, blo, bhi) & W
        terms.append(Term(a, k, box))
    return Functional(n, d, 0, tuple(terms))


def realisability_report(
    s2: S2Curve,
    scales: Sequence[Scale],
    budget: int = 2**16,
    n_random: int = 200,
    seed: int = 0,
    tol: float = 1e-9,
    nsigma: float = 3.0,
    kmax: int = 2,
) -> RealisabilityReport:
    """Screen ``S2`` with lattice necessary conditions and exact covariogram probes.

    Each probe ``g`` is minimized exactly over pixel sets; if ``min g >= 0``
    but ``Φ(g) < 0`` the curve cannot be a specific covariogram, and ``g`` is
    reported as a witness.  Random probes are shifted by their minimum so they
    are tight at zero.  CONSISTENT only means nothing failed at the tested
    scales.
    """
    violations = necessary_conditions(s2, tol=tol, nsigma=nsigma)
    rng = np.random.default_rng(seed)
    witnesses: list[ProbeOutcome] = []
    families: dict[str, int] = {}
    skipped = 0

    def run(family: str, g: Functional, shift_to_zero: bool) -> None:
        nonlocal skipped
        if any(not s2.supports(tuple(Fraction(v, g.n) for v in t.k)) for t in g.terms):
            skipped += 1
            return
        if (1 << len(g.domain())) > budget:
            skipped += 1
            return
        res = minimize_functional(g, budget)
        if shift_to_zero:
            g = g - res.value
            res_value = 0.0
        else:
            res_value = float(res.value)
        families[family] = families.get(family, 0) + 1
        phi = apply_to_s2(g, s2)
        slack = tol * (1 + sum(abs(float(t.a)) * t.W.volume() for t in g.terms)) + _phi_slack(g, s2, nsigma)
        out = ProbeOutcome(family, g, res_value, res.exact, phi, slack)
        if out.violated:
            witnesses.append(out)

    for scale in scales:
        if scale.window.d != s2.d:
            raise GridError("scale window dimension does not match the S2 curve")
        for family, g in _structured_probes(scale, kmax):
            run(family, g, shift_to_zero=False)
        for _ in range(n_random):
            run("random", _random_probe(rng, scale, kmax), shift_to_zero=True)

    lips = [lipschitz_at_zero(s2, j) for j in range(s2.d)]
    verdict = "REJECTED" if (violations or witnesses) else "CONSISTENT"
    return RealisabilityReport(
        verdict=verdict,
        violations=violations,
        probe_witnesses=witnesses,
        lipschitz=lips,
        per_s_lower_bound=2 * sum(e.sup for e in lips),
        scales_tested=list(scales),
        probe_families=families,
        probes_skipped=skipped,
        label=s2.label,
    )


# -------------------------------------------------------------- closed forms

def _radius(pts: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(np.asarray(pts, dtype=float) ** 2, axis=1))


def _boolean1d(lam: float = 1.0, ell: float = 1.0):
    q = math.exp(-lam * ell)
    return lambda pts: 1 - 2 * q + np.exp(-lam * (ell + np.minimum(np.abs(pts[:, 0]), ell)))


def _gaussian(scale: float = 1.0):
    return lambda pts: np.exp(-(_radius(pts) / scale) ** 2)


def _ramp(width: float = 1.0):
    return lambda pts: np.maximum(0.0, 1.0 - _radius(pts) / width)


def _constant(value: float = 0.5):
    return lambda pts: np.full(len(pts), float(value))


CLOSED_FORMS: dict[str, Callable] = {
    "boolean1d": _boolean1d,
    "gaussian": _gaussian,
    "ramp": _ramp,
    "constant": _constant,
}


def closed_form_curve(kind: str, d: int = 1, h=Fraction(1, 60), K: int = 60, **params) -> S2Curve:
    """Sampled closed-form curve that keeps its formula as the off-lattice callback.

    ``boolean1d`` (fixed grains, ``lam``, ``ell``) is a realizable reference;
    ``gaussian`` is ``exp(-|y|^2/scale^2)``; ``ramp`` is ``max(0, 1 - |y|/width)``.
    """
    if kind not in CLOSED_FORMS:
        raise ValueError(f"unknown closed form {kind!r}; choose from {sorted(CLOSED_FORMS)}")
    if kind == "boolean1d" and d != 1:
        raise ValueError("boolean1d closed form is one-dimensional")
    f = CLOSED_FORMS[kind](**params)
    label = kind + "".join(f" {k}={v!r}" for k, v in sorted(params.items()))
    return S2Curve.from_function(f, d, h, K, label=label)


def curve_from_dict(obj: dict) -> S2Curve:
    """Either sampled values (``S2Curve.to_dict``) or ``{"closed_form": kind, ...}``."""
    if "closed_form" in obj:
        params = dict(obj.get("params", {}))
        h = obj.get("h", "1/60")
        h = Fraction(h) if isinstance(h, str) else _as_fraction(h)
        return closed_form_curve(obj["closed_form"], int(obj.get("d", 1)), h, int(obj.get("K", 60)), **params)
    return S2Curve.from_dict(obj)
