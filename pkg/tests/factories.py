"""Random test inputs shared by several test modules."""
from fractions import Fraction
import itertools

import numpy as np

from ramscov.grid import PixelSet, Window
from ramscov.polytope import Functional, Term


def random_functional(rng, n=1, d=1, max_dom=12, q_range=(1, 4), span=4, kmax=2, rational=True):
    """Random ``c + Σ a_i δ_{k_i/n; W_i}`` whose domain has at most ``max_dom`` cells."""
    while True:
        q = int(rng.integers(*q_range))
        terms = []
        for _ in range(q):
            if rational:
                a = Fraction(int(rng.integers(-6, 7)), int(rng.choice([1, 2, 3])))
            else:
                a = float(rng.normal())
            k = tuple(int(v) for v in rng.integers(-kmax, kmax + 1, size=d))
            lo = rng.integers(-span, span, size=d)
            hi = lo + rng.integers(1, 4, size=d)
            terms.append(Term(a, k, Window.box(n, lo, hi)))
        c = Fraction(int(rng.integers(-3, 4))) if rational else float(rng.normal())
        g = Functional(n, d, c, tuple(terms))
        if 0 < len(g.domain()) <= max_dom:
            return g


def all_subsets(g: Functional):
    cells = sorted(g.domain().cells)
    for bits in itertools.product((0, 1), repeat=len(cells)):
        yield PixelSet(g.n, g.d, frozenset(c for c, b in zip(cells, bits) if b))


def brute_minimum(g: Functional):
    """Naive oracle: evaluate g through local covariograms on every subset of dom(g).

    Ties go to the lexicographically smallest sorted list of domain indices.
    """
    cells = sorted(g.domain().cells)
    pos = {c: i for i, c in enumerate(cells)}
    best, arg = None, None
    for A in all_subsets(g):
        v = g(A)
        key = sorted(pos[c] for c in A.cells)
        if best is None or v < best or (v == best and key < sorted(pos[c] for c in arg.cells)):
            best, arg = v, A
    return best, arg


def random_cells(rng, n, d, shape, p=0.5, origin=None):
    mask = rng.random(shape) < p
    origin = np.zeros(d, dtype=int) if origin is None else np.asarray(origin)
    return PixelSet.from_mask(mask, n, origin)
