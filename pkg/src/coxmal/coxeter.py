"""Finite Coxeter groups of types A, B, D and I2(m).

Types A, B and D are stored through window notation: an element w is the
tuple ``(w(1), ..., w(n))``.  A windows are plain permutations of 1..n,
B windows carry arbitrary signs, D windows have an even number of negative
entries.  The action on negative positions is determined by w(-i) = -w(i)
and is never stored.

Generators are indexed 0..num_generators-1:

* type A: generator i swaps window positions i and i+1 (0-based),
* type B: generator 0 negates the first window entry, generator i >= 1
  swaps positions i-1 and i (so it compares w(i) and w(i+1) in 1-based
  terms),
* type D: generator 0 maps (w(1), w(2)) to (-w(2), -w(1)), the rest act
  exactly as in type B,
* type I2(m): generators 0 and 1 are the two reflections s0: x -> -x and
  s1: x -> 1-x of Z/m; elements are stored as (shift, sign) pairs.
"""

from __future__ import annotations

import itertools
import math
import os
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_ENUM_CAP = 10_000_000
ENUM_CAP_ENV = "COXMAL_ENUM_CAP"

KIND_ORDER = ("A", "B", "D", "I2")


class EnumerationCapError(RuntimeError):
    """Raised when a group is too large to enumerate under the active cap."""


# ---------------------------------------------------------------------------
# descriptors


@dataclass(frozen=True)
class GroupDescriptor:
    """An irreducible factor: kind in {A, B, D, I2} plus rank.

    For I2 the ``rank`` slot stores m, the rotation order of the m-gon.
    """

    kind: str
    rank: int

    def __post_init__(self):
        if self.kind not in KIND_ORDER:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "A" and self.rank < 1:
            raise ValueError("type A needs rank >= 1")
        if self.kind == "B" and self.rank < 2:
            raise ValueError("type B needs rank >= 2")
        if self.kind == "D" and self.rank < 4:
            raise ValueError("type D needs rank >= 4")
        if self.kind == "I2" and self.rank < 3:
            raise ValueError("type I2(m) needs m >= 3")

    @property
    def num_generators(self) -> int:
        return 2 if self.kind == "I2" else self.rank

    @property
    def window_size(self) -> int:
        """Number of window entries (positions 1..n the element is stored on)."""
        if self.kind == "A":
            return self.rank + 1
        if self.kind == "I2":
            raise ValueError("I2 elements are not stored as windows")
        return self.rank

    def order(self) -> int:
        if self.kind == "A":
            return math.factorial(self.rank + 1)
        if self.kind == "B":
            return (1 << self.rank) * math.factorial(self.rank)
        if self.kind == "D":
            return (1 << (self.rank - 1)) * math.factorial(self.rank)
        return 2 * self.rank

    def longest_length(self) -> int:
        """Length of the longest element."""
        if self.kind == "A":
            r = self.rank
            return r * (r + 1) // 2
        if self.kind == "B":
            return self.rank * self.rank
        if self.kind == "D":
            return self.rank * (self.rank - 1)
        return self.rank

    def __str__(self) -> str:
        if self.kind == "I2":
            return f"I2({self.rank})"
        return f"{self.kind}{self.rank}"


@dataclass(frozen=True)
class ProductDescriptor:
    """A direct product of irreducible factors, e.g. B4 x A2 x I2(5)."""

    factors: tuple[GroupDescriptor, ...]

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("product needs at least one factor")

    @property
    def num_generators(self) -> int:
        return sum(f.num_generators for f in self.factors)

    def order(self) -> int:
        return math.prod(f.order() for f in self.factors)

    def longest_length(self) -> int:
        return sum(f.longest_length() for f in self.factors)

    def __str__(self) -> str:
        return " x ".join(str(f) for f in self.factors)


_IRRED_RE = re.compile(r"^(?:([ABD])\s*(\d+)|I2\s*\(\s*(\d+)\s*\))$")


def parse_group(text: str):
    """Parse a descriptor like ``"B4"``, ``"I2(7)"`` or ``"B4 x A2 x I2(5)"``.

    Returns a GroupDescriptor for a single factor and a ProductDescriptor
    when the text contains ``x``-separated factors.
    """
    parts = [p.strip() for p in text.strip().split(" x ")]
    if not parts or any(not p for p in parts):
        raise ValueError(f"cannot parse group descriptor {text!r}")
    factors = []
    for part in parts:
        m = _IRRED_RE.match(part)
        if m is None:
            raise ValueError(f"cannot parse group descriptor {part!r}")
        if m.group(1) is not None:
            factors.append(GroupDescriptor(m.group(1), int(m.group(2))))
        else:
            factors.append(GroupDescriptor("I2", int(m.group(3))))
    if len(factors) == 1:
        return factors[0]
    return ProductDescriptor(tuple(factors))


def descriptor_factors(g) -> tuple[GroupDescriptor, ...]:
    if isinstance(g, ProductDescriptor):
        return g.factors
    return (g,)


# ---------------------------------------------------------------------------
# elements


@dataclass(frozen=True)
class SignedPermutation:
    """A window (w(1), ..., w(n)) of a type A, B or D element."""

    window: tuple[int, ...]

    def __post_init__(self):
        mags = sorted(abs(v) for v in self.window)
        if mags != list(range(1, len(self.window) + 1)):
            raise ValueError(f"not a signed permutation window: {self.window}")

    @property
    def n(self) -> int:
        return len(self.window)

    @classmethod
    def identity(cls, n: int) -> "SignedPermutation":
        return cls(tuple(range(1, n + 1)))

    @classmethod
    def from_text(cls, text: str) -> "SignedPermutation":
        body = text.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise ValueError(f"element text must look like [2,-1,3], got {text!r}")
        entries = [s.strip() for s in body[1:-1].split(",") if s.strip()]
        return cls(tuple(int(s) for s in entries))

    def value_at(self, i: int) -> int:
        """w(i) for a signed position i, using w(-i) = -w(i)."""
        if i > 0:
            return self.window[i - 1]
        if i < 0:
            return -self.window[-i - 1]
        raise ValueError("position 0 does not exist")

    def negative_count(self) -> int:
        return sum(1 for v in self.window if v < 0)

    def __str__(self) -> str:
        return "[" + ",".join(str(v) for v in self.window) + "]"


@dataclass(frozen=True)
class DihedralElement:
    """Element of I2(m): the map x -> shift + sign*x on Z/m.

    sign +1 gives the m rotations, sign -1 the m reflections.
    """

    m: int
    shift: int
    sign: int

    def __post_init__(self):
        if self.m < 3:
            raise ValueError("need m >= 3")
        if not (0 <= self.shift < self.m) or self.sign not in (1, -1):
            raise ValueError(f"bad dihedral element ({self.shift}, {self.sign})")

    @classmethod
    def identity(cls, m: int) -> "DihedralElement":
        return cls(m, 0, 1)

    @classmethod
    def from_text(cls, m: int, text: str) -> "DihedralElement":
        body = text.strip()
        m2 = re.match(r"^r(\d+)(f?)$", body)
        if m2 is None:
            raise ValueError(f"dihedral element text must look like r3 or r3f, got {text!r}")
        return cls(m, int(m2.group(1)), -1 if m2.group(2) else 1)

    def __str__(self) -> str:
        return f"r{self.shift}" + ("f" if self.sign < 0 else "")


def element_to_text(w) -> str:
    if isinstance(w, tuple):
        return " x ".join(element_to_text(f) for f in w)
    return str(w)


def element_from_text(text: str, g):
    factors = descriptor_factors(g)
    parts = [p.strip() for p in text.strip().split(" x ")]
    if len(parts) != len(factors):
        raise ValueError(f"expected {len(factors)} factors in {text!r}")
    elems = []
    for part, f in zip(parts, factors):
        if f.kind == "I2":
            elems.append(DihedralElement.from_text(f.rank, part))
        else:
            w = SignedPermutation.from_text(part)
            _check_window(w, f)
            elems.append(w)
    if len(elems) == 1:
        return elems[0]
    return tuple(elems)


def _check_window(w: SignedPermutation, g: GroupDescriptor):
    if w.n != g.window_size:
        raise ValueError(f"window size {w.n} does not match {g}")
    if g.kind == "A" and any(v < 0 for v in w.window):
        raise ValueError(f"type A window must be positive: {w.window}")
    if g.kind == "D" and w.negative_count() % 2 != 0:
        raise ValueError(f"type D window needs an even number of negatives: {w.window}")


def identity_element(g):
    if isinstance(g, ProductDescriptor):
        return tuple(identity_element(f) for f in g.factors)
    if g.kind == "I2":
        return DihedralElement.identity(g.rank)
    return SignedPermutation.identity(g.window_size)


# ---------------------------------------------------------------------------
# composition and inversion (no descriptor needed)


def compose(u, v):
    """The product uv, acting as (uv)(x) = u(v(x))."""
    if isinstance(u, tuple):
        return tuple(compose(a, b) for a, b in zip(u, v))
    if isinstance(u, DihedralElement):
        return DihedralElement(
            u.m, (u.shift + u.sign * v.shift) % u.m, u.sign * v.sign
        )
    uw = u.window
    out = []
    for x in v.window:
        out.append(uw[x - 1] if x > 0 else -uw[-x - 1])
    return SignedPermutation(tuple(out))


def invert(w):
    if isinstance(w, tuple):
        return tuple(invert(f) for f in w)
    if isinstance(w, DihedralElement):
        return DihedralElement(w.m, (-w.sign * w.shift) % w.m, w.sign)
    out = [0] * len(w.window)
    for pos, val in enumerate(w.window, start=1):
        if val > 0:
            out[val - 1] = pos
        else:
            out[-val - 1] = -pos
    return SignedPermutation(tuple(out))


def negate(w: SignedPermutation) -> SignedPermutation:
    """The window -w, i.e. (-w)(i) = -w(i).

    Stays inside type B always; stays inside type D only for even rank.
    """
    return SignedPermutation(tuple(-v for v in w.window))


# ---------------------------------------------------------------------------
# length


def _window_length(kind: str, win: tuple[int, ...]) -> int:
    n = len(win)
    inv = 0
    for i in range(n):
        wi = win[i]
        for j in range(i + 1, n):
            if wi > win[j]:
                inv += 1
    if kind == "A":
        return inv
    if kind == "B":
        # pairs 1 <= i <= j <= n with w(i) + w(j) < 0
        extra = 0
        for i in range(n):
            if 2 * win[i] < 0:
                extra += 1
            wi = win[i]
            for j in range(i + 1, n):
                if wi + win[j] < 0:
                    extra += 1
        return inv + extra
    if kind == "D":
        extra = 0
        for i in range(n):
            wi = win[i]
            for j in range(i + 1, n):
                if wi + win[j] < 0:
                    extra += 1
        return inv + extra
    raise ValueError(f"no window length for kind {kind!r}")


@lru_cache(maxsize=None)
def _dihedral_length_table(m: int) -> dict:
    """Word lengths in I2(m) by breadth-first search over the Cayley graph."""
    gens = (DihedralElement(m, 0, -1), DihedralElement(m, 1, -1))
    dist = {DihedralElement.identity(m): 0}
    frontier = [DihedralElement.identity(m)]
    while frontier:
        nxt = []
        for w in frontier:
            for s in gens:
                ws = compose(w, s)
                if ws not in dist:
                    dist[ws] = dist[w] + 1
                    nxt.append(ws)
        frontier = nxt
    return dist


def length(w, g) -> int:
    if isinstance(g, ProductDescriptor):
        return sum(length(f, fg) for f, fg in zip(w, g.factors))
    if g.kind == "I2":
        return _dihedral_length_table(g.rank)[w]
    return _window_length(g.kind, w.window)


# ---------------------------------------------------------------------------
# generator actions


def generator_element(i: int, g):
    """The generator s_i as a group element."""
    return apply_right_generator(identity_element(g), i, g)


def _product_locate(i: int, g: ProductDescriptor):
    for k, f in enumerate(g.factors):
        if i < f.num_generators:
            return k, i
        i -= f.num_generators
    raise IndexError("generator index out of range")


def apply_right_generator(w, i: int, g):
    """w * s_i."""
    if isinstance(g, ProductDescriptor):
        k, j = _product_locate(i, g)
        return tuple(
            apply_right_generator(f, j, g.factors[k]) if t == k else f
            for t, f in enumerate(w)
        )
    if g.kind == "I2":
        return compose(w, DihedralElement(g.rank, i, -1))
    if not 0 <= i < g.num_generators:
        raise IndexError(f"generator index {i} out of range for {g}")
    win = list(w.window)
    if g.kind == "A":
        win[i], win[i + 1] = win[i + 1], win[i]
    elif g.kind == "B":
        if i == 0:
            win[0] = -win[0]
        else:
            win[i - 1], win[i] = win[i], win[i - 1]
    else:  # D
        if i == 0:
            win[0], win[1] = -win[1], -win[0]
        else:
            win[i - 1], win[i] = win[i], win[i - 1]
    return SignedPermutation(tuple(win))


def apply_left_generator(w, i: int, g):
    """s_i * w, computed by remapping window values."""
    if isinstance(g, ProductDescriptor):
        k, j = _product_locate(i, g)
        return tuple(
            apply_left_generator(f, j, g.factors[k]) if t == k else f
            for t, f in enumerate(w)
        )
    if g.kind == "I2":
        return compose(DihedralElement(g.rank, i, -1), w)
    if not 0 <= i < g.num_generators:
        raise IndexError(f"generator index {i} out of range for {g}")
    if g.kind == "A":
        a, b = i + 1, i + 2
        table = {a: b, b: a}
    elif i >= 1:  # B or D, value swap i <-> i+1 preserving sign
        a, b = i, i + 1
        table = {a: b, b: a, -a: -b, -b: -a}
    elif g.kind == "B":
        table = {1: -1, -1: 1}
    else:  # D, generator 0
        table = {1: -2, 2: -1, -1: 2, -2: 1}
    return SignedPermutation(tuple(table.get(v, v) for v in w.window))


# ---------------------------------------------------------------------------
# descents


def is_right_descent(w, i: int, g) -> bool:
    """Whether l(w s_i) < l(w), via window comparisons where possible."""
    if isinstance(g, ProductDescriptor):
        k, j = _product_locate(i, g)
        return is_right_descent(w[k], j, g.factors[k])
    if g.kind == "I2":
        table = _dihedral_length_table(g.rank)
        return table[apply_right_generator(w, i, g)] < table[w]
    win = w.window
    if g.kind == "A":
        return win[i] > win[i + 1]
    if i >= 1:
        return win[i - 1] > win[i]
    if g.kind == "B":
        return win[0] < 0
    return win[0] + win[1] < 0  # D


def is_left_descent(w, i: int, g) -> bool:
    return is_right_descent(invert(w), i, g)


def descent_indicator(w, i: int, g, side: str = "right") -> int:
    if side == "right":
        return 1 if is_right_descent(w, i, g) else 0
    if side == "left":
        return 1 if is_left_descent(w, i, g) else 0
    raise ValueError(f"side must be 'right' or 'left', got {side!r}")


def descent_number(w, g, side: str = "right") -> int:
    return sum(descent_indicator(w, i, g, side) for i in range(g.num_generators))


def two_sided_descent(w, g) -> int:
    """t(w) = des(w) + des(w^{-1})."""
    return descent_number(w, g, "right") + descent_number(w, g, "left")


# ---------------------------------------------------------------------------
# Coxeter graph and parabolic subsets


def coxeter_graph_neighbors(g: GroupDescriptor) -> dict[int, frozenset[int]]:
    """Adjacency of the Coxeter graph (pairs of non-commuting generators)."""
    if isinstance(g, ProductDescriptor):
        raise ValueError("graph helpers work on irreducible descriptors")
    n = g.num_generators
    edges = set()
    if g.kind in ("A", "B", "I2"):
        edges = {(i, i + 1) for i in range(n - 1)}
    else:  # D: generator 0 hangs off generator 2
        edges = {(i, i + 1) for i in range(1, n - 1)}
        edges.add((0, 2))
    out = {i: set() for i in range(n)}
    for a, b in edges:
        out[a].add(b)
        out[b].add(a)
    return {i: frozenset(v) for i, v in out.items()}


def generators_commute(i: int, j: int, g: GroupDescriptor) -> bool:
    return i == j or j not in coxeter_graph_neighbors(g)[i]


@dataclass(frozen=True)
class ParabolicSubset:
    """A subset S of the generators of an irreducible group."""

    group: GroupDescriptor
    generators: frozenset

    def __post_init__(self):
        if isinstance(self.group, ProductDescriptor):
            raise ValueError("parabolic subsets are defined on irreducible factors")
        object.__setattr__(self, "generators", frozenset(self.generators))
        for i in self.generators:
            if not 0 <= i < self.group.num_generators:
                raise ValueError(f"generator index {i} out of range for {self.group}")

    def components(self) -> tuple[frozenset, ...]:
        """Connected components of S inside the Coxeter graph."""
        nbrs = coxeter_graph_neighbors(self.group)
        left = set(self.generators)
        comps = []
        while left:
            seed = left.pop()
            comp = {seed}
            frontier = [seed]
            while frontier:
                x = frontier.pop()
                for y in nbrs[x]:
                    if y in left:
                        left.remove(y)
                        comp.add(y)
                        frontier.append(y)
            comps.append(frozenset(comp))
        return tuple(sorted(comps, key=min))

    def support(self) -> frozenset:
        """The set of signed values moved by the subgroup generated by S.

        For type A, generator i touches values i+1 and i+2.  For B and D,
        generator i >= 1 touches +-i and +-(i+1) (only the positive pair is
        reported unless forced below), generator 0 touches -1, 1 for B and
        -2, -1, 1, 2 for D, and any chain-connected component containing
        generator 0 drags in the negatives of its values.
        """
        g = self.group
        if g.kind == "I2":
            raise ValueError("no window support for I2")
        vals = set()
        if g.kind == "A":
            for i in self.generators:
                vals.update((i + 1, i + 2))
            return frozenset(vals)
        for i in self.generators:
            if i >= 1:
                vals.update((i, i + 1))
            elif g.kind == "B":
                vals.update((-1, 1))
            else:
                vals.update((-2, -1, 1, 2))
        if 0 in self.generators:
            for comp in self.components():
                if 0 in comp:
                    for k in comp:
                        if k >= 1:
                            vals.update((-k, -k - 1))
        return frozenset(vals)


def parabolic_decompose(w, subset: ParabolicSubset, g):
    """Split w = u * v with v in W_S and u the minimal coset representative.

    Greedy: strip right descents lying in S.  Lengths add up, and the pair
    is unique.
    """
    gens = sorted(subset.generators)
    u = w
    v = identity_element(g)
    while True:
        hit = None
        for i in gens:
            if is_right_descent(u, i, g):
                hit = i
                break
        if hit is None:
            return u, v
        u = apply_right_generator(u, hit, g)
        v = compose(generator_element(hit, g), v)


def longest_element_in(subset: ParabolicSubset, g):
    """Longest element of the standard parabolic subgroup W_S."""
    gens = sorted(subset.generators)
    w = identity_element(g)
    while True:
        hit = None
        for i in gens:
            if not is_right_descent(w, i, g):
                hit = i
                break
        if hit is None:
            return w
        w = apply_right_generator(w, hit, g)


# ---------------------------------------------------------------------------
# enumeration


def _enum_cap(cap) -> int:
    if cap is not None:
        return int(cap)
    return int(os.environ.get(ENUM_CAP_ENV, DEFAULT_ENUM_CAP))


def enumerate_group(g, cap=None):
    """Yield every element of the group, respecting the enumeration cap.

    Signed permutations come out as permutation-times-sign-choices; type D
    keeps only windows with an even number of negative entries.
    """
    if g.order() > _enum_cap(cap):
        raise EnumerationCapError(
            f"{g} has {g.order()} elements, above the cap {_enum_cap(cap)}"
        )
    yield from _enumerate_uncapped(g)


def _enumerate_uncapped(g):
    if isinstance(g, ProductDescriptor):
        pools = [list(_enumerate_uncapped(f)) for f in g.factors]
        for combo in itertools.product(*pools):
            yield combo
        return
    if g.kind == "I2":
        for sign in (1, -1):
            for shift in range(g.rank):
                yield DihedralElement(g.rank, shift, sign)
        return
    n = g.window_size
    if g.kind == "A":
        for perm in itertools.permutations(range(1, n + 1)):
            yield SignedPermutation(perm)
        return
    for perm in itertools.permutations(range(1, n + 1)):
        for signs in itertools.product((1, -1), repeat=n):
            if g.kind == "D" and signs.count(-1) % 2 != 0:
                continue
            yield SignedPermutation(tuple(s * v for s, v in zip(signs, perm)))


# ---------------------------------------------------------------------------
# vectorized window helpers (batches as integer arrays of shape (count, n))


def windows_invert(W: np.ndarray) -> np.ndarray:
    count, n = W.shape
    pos = np.arange(1, n + 1, dtype=W.dtype)
    V = np.empty_like(W)
    idx = np.abs(W) - 1
    vals = np.sign(W) * pos[None, :]
    np.put_along_axis(V, idx, vals, axis=1)
    return V


def windows_descent_counts(kind: str, W: np.ndarray) -> np.ndarray:
    """Right-descent numbers for a batch of windows."""
    base = np.count_nonzero(W[:, :-1] > W[:, 1:], axis=1)
    if kind == "B":
        base = base + (W[:, 0] < 0)
    elif kind == "D":
        base = base + (W[:, 0] + W[:, 1] < 0)
    elif kind != "A":
        raise ValueError(f"no window descents for kind {kind!r}")
    return base.astype(np.int64)


def windows_two_sided(kind: str, W: np.ndarray) -> np.ndarray:
    return windows_descent_counts(kind, W) + windows_descent_counts(
        kind, windows_invert(W)
    )


def windows_lengths(kind: str, W: np.ndarray) -> np.ndarray:
    """Lengths for a batch of windows; quadratic in n, fine at desk scale."""
    count, n = W.shape
    out = np.zeros(count, dtype=np.int64)
    for i in range(n):
        wi = W[:, i]
        for j in range(i + 1, n):
            wj = W[:, j]
            out += wi > wj
            if kind in ("B", "D"):
                out += (wi + wj) < 0
        if kind == "B":
            out += wi < 0
    return out
