"""Mallows measures mu_q(w) = q^l(w) / Z on finite Coxeter groups.

Sampling walks a tower of parabolic quotients: window positions are filled
from the right, each stage choosing a minimal coset representative with
probability proportional to q^(its length).  Stage m of type A offers m
choices with length contributions m-a for a = 1..m; types B and D offer 2m
signed choices.  Type D towers stop at stage 2 (the four sign/swap choices
there are the whole D2 base) and the first window entry is forced by the
remaining label.  Dihedral factors are sampled directly from their 2m
element table.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .coxeter import (
    DihedralElement,
    GroupDescriptor,
    ProductDescriptor,
    SignedPermutation,
    _dihedral_length_table,
    _window_length,
    descriptor_factors,
    enumerate_group,
    length,
    parse_group,
    windows_descent_counts,
    windows_invert,
    windows_lengths,
    windows_two_sided,
)
from .reports import CheckResult

Q_ONE_WINDOW = 1e-6  # |q-1| below this: evaluate q-integers by direct summation
SAMPLE_CHUNK = 16384


# ---------------------------------------------------------------------------
# q-integers and normalization constants


def q_integer(m: int, q: float) -> float:
    """[m]_q = 1 + q + ... + q^(m-1), summed directly near q = 1."""
    if m < 0:
        raise ValueError("q-integer needs m >= 0")
    if abs(q - 1.0) < Q_ONE_WINDOW:
        return float(sum(q**k for k in range(m)))
    return (q**m - 1.0) / (q - 1.0)

def q_factorial(m: int, q: float) -> float:
    out = 1.0
    for i in range(1, m + 1):
        out *= q_integer(i, q)
    return out

def q_even_double_factorial(k: int, q: float) -> float:
    """[2k]!!_q = [2]_q [4]_q ... [2k]_q."""
    out = 1.0
    for i in range(1, k + 1):
        out *= q_integer(2 * i, q)
    return out


def normalization_constant(g, q: float) -> float:
    """Z(q) = sum over the group of q^length, in closed form."""
    if isinstance(g, ProductDescriptor):
        return math.prod(normalization_constant(f, q) for f in g.factors)
    _check_q(q)
    if g.kind == "A":
        z = q_factorial(g.rank + 1, q)
    elif g.kind == "B":
        z = q_even_double_factorial(g.rank, q)
    elif g.kind == "D":
        z = q_integer(g.rank, q) * q_even_double_factorial(g.rank - 1, q)
    else:
        m = g.rank
        z = 1.0 + 2.0 * q * q_integer(m - 1, q) + q**m
    if not math.isfinite(z):
        raise ValueError(f"normalization constant for {g} at q={q} overflows a double")
    return z


def _check_q(q: float) -> None:
    if not (isinstance(q, (int, float)) and math.isfinite(q) and q > 0):
        raise ValueError(f"q must be a finite positive real, got {q!r}")


# ---------------------------------------------------------------------------
# model spec


@dataclass(frozen=True)
class MallowsSpec:
    """A group descriptor plus one q per irreducible factor."""

    group: object
    qs: tuple[float, ...]

    def __post_init__(self):
        nf = len(descriptor_factors(self.group))
        if len(self.qs) != nf:
            raise ValueError(f"need {nf} q values, got {len(self.qs)}")
        for q in self.qs:
            _check_q(q)

    @classmethod
    def make(cls, group, q) -> "MallowsSpec":
        """Broadcast a scalar q over all factors, or accept one q per factor."""
        if isinstance(group, str):
            group = parse_group(group)
        nf = len(descriptor_factors(group))
        if isinstance(q, (int, float)):
            qs = (float(q),) * nf
        else:
            qs = tuple(float(x) for x in q)
            if len(qs) == 1:
                qs = qs * nf
        return cls(group, qs)

    @property
    def q(self) -> float:
        qs = set(self.qs)
        if len(qs) != 1:
            raise ValueError("spec has factor-dependent q values")
        return self.qs[0]

    def factor_specs(self):
        return list(zip(descriptor_factors(self.group), self.qs))

    def normalization(self) -> float:
        return math.prod(normalization_constant(f, q) for f, q in self.factor_specs())

    def __str__(self) -> str:
        qs = sorted(set(self.qs))
        qtxt = f"q={self.qs[0]:g}" if len(qs) == 1 else "q=" + ",".join(
            f"{q:g}" for q in self.qs
        )
        return f"{self.group} {qtxt}"


def pmf(w, spec: MallowsSpec) -> float:
    """mu_q(w); exact-scale use only (overflows at large rank and q far from 1)."""
    factors = descriptor_factors(spec.group)
    ws = w if isinstance(w, tuple) and len(factors) > 1 else (w,)
    out = 1.0
    for wf, (f, q) in zip(ws, spec.factor_specs()):
        out *= q ** length(wf, f) / normalization_constant(f, q)
    return out


# ---------------------------------------------------------------------------
# tower stage tables


@lru_cache(maxsize=None)
def stage_candidates(kind: str, m: int):
    """Choices when the tower fills window position m, as (a, s, contribution).

    a picks the a-th smallest remaining label, s its sign, and contribution
    is the length of the minimal coset representative realizing the choice.
    Built directly by writing down the local window and counting inversions;
    the closed-form twin below must agree (tests compare them).
    """
    signs = (1,) if kind == "A" else (1, -1)
    out = []
    for a in range(1, m + 1):
        for s in signs:
            rest = [x for x in range(1, m + 1) if x != a]
            if kind == "D" and s < 0:
                rest[0] = -rest[0]
            win = tuple(rest + [s * a])
            out.append((a, s, _window_length(kind, win)))
    return tuple(out)


@lru_cache(maxsize=None)
def stage_contributions(kind: str, m: int):
    """Closed-form length contributions, same ordering as stage_candidates."""
    out = []
    for a in range(1, m + 1):
        if kind == "A":
            out.append((a, 1, m - a))
            continue
        out.append((a, 1, m - a))
        if kind == "B":
            out.append((a, -1, m + a - 1))
        else:
            out.append((a, -1, m + a - 2))
    return tuple(out)


def _tower_stages(kind: str, n: int):
    return range(n, 1 if kind == "D" else 0, -1)


_STAGE_ARRAYS: dict = {}


def _stage_arrays(kind: str, m: int, q: float):
    """(a, s, cumweight) numpy arrays for one stage; weights scaled to <= 1."""
    key = (kind, m, q)
    hit = _STAGE_ARRAYS.get(key)
    if hit is not None:
        return hit
    cands = stage_contributions(kind, m)
    a = np.array([c[0] for c in cands], dtype=np.int64)
    s = np.array([c[1] for c in cands], dtype=np.int64)
    contrib = np.array([c[2] for c in cands], dtype=np.float64)
    if q > 1.0:
        contrib = contrib - contrib.max()
    cum = np.cumsum(np.power(q, contrib))
    _STAGE_ARRAYS[key] = (a, s, cum)
    return a, s, cum


def stage_distribution(kind: str, m: int, q: float) -> np.ndarray:
    """Probabilities of the stage choices, in stage_candidates order."""
    contrib = np.array([c[2] for c in stage_contributions(kind, m)], dtype=np.float64)
    w = np.power(q, contrib - (contrib.max() if q > 1.0 else 0.0))
    return w / w.sum()


# ---------------------------------------------------------------------------
# single draws


def sample_one(spec: MallowsSpec, rng: np.random.Generator):
    """One draw from the spec; returns an element (tuple for products)."""
    parts = [_sample_one_factor(f, q, rng) for f, q in spec.factor_specs()]
    return parts[0] if len(parts) == 1 else tuple(parts)


def _sample_one_factor(g: GroupDescriptor, q: float, rng):
    if g.kind == "I2":
        elems, probs = _dihedral_table(g.rank, q)
        return elems[rng.choice(len(elems), p=probs)]
    kind, n = g.kind, g.window_size
    win = [0] * n
    labels = list(range(1, n + 1))
    for m in _tower_stages(kind, n):
        a_arr, s_arr, cum = _stage_arrays(kind, m, q)
        u = rng.random() * cum[-1]
        k = int(np.searchsorted(cum, u, side="right"))
        k = min(k, len(cum) - 1)
        a, s = int(a_arr[k]), int(s_arr[k])
        win[m - 1] = s * labels.pop(a - 1)
        if kind == "D" and s < 0:
            labels[0] = -labels[0]
    if kind == "D":
        win[0] = labels[0]
    return SignedPermutation(tuple(win))


@lru_cache(maxsize=None)
def _dihedral_elements(m: int):
    table = _dihedral_length_table(m)
    elems = sorted(table, key=lambda w: (table[w], w.sign, w.shift))
    lengths = np.array([table[w] for w in elems], dtype=np.float64)
    return tuple(elems), lengths


def _dihedral_table(m: int, q: float):
    elems, lengths = _dihedral_elements(m)
    w = np.power(q, lengths - (lengths.max() if q > 1.0 else 0.0))
    return elems, w / w.sum()


# ---------------------------------------------------------------------------
# batch draws


def _chunk_sizes(count: int):
    out = [SAMPLE_CHUNK] * (count // SAMPLE_CHUNK)
    if count % SAMPLE_CHUNK:
        out.append(count % SAMPLE_CHUNK)
    return out


def _run_chunks(worker, sizes, children, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, sizes, children))
    return [worker(c, s) for c, s in zip(sizes, children)]


def sample_windows(
    g: GroupDescriptor, q: float, count: int, seed, threads: int = 1
) -> np.ndarray:
    """(count, n) array of windows, deterministic in (g, q, count, seed).

    The chunk layout is fixed, each chunk gets its own spawned seed, and
    results are concatenated in chunk order, so the thread count never
    changes the output.
    """
    _check_q(q)
    if g.kind == "I2":
        raise ValueError("dihedral factors have no windows; sample stats instead")
    if count < 0:
        raise ValueError("count must be >= 0")
    n = g.window_size
    if count == 0:
        return np.empty((0, n), dtype=np.int64)
    sizes = _chunk_sizes(count)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = seq.spawn(len(sizes))

    def worker(cnt, child):
        return _chunk_windows(g.kind, n, q, cnt, child)

    return np.concatenate(_run_chunks(worker, sizes, children, threads), axis=0)


def _chunk_windows(kind: str, n: int, q: float, cnt: int, child) -> np.ndarray:
    rng = np.random.default_rng(child)
    if q == 1.0:
        return _uniform_windows(kind, n, cnt, rng)
    if kind == "A" and q < 1.0:
        return _a_geometric_windows(n, q, cnt, rng)
    stages = list(_tower_stages(kind, n))
    ks = np.empty((cnt, len(stages)), dtype=np.int64)
    tabs = []
    for t, m in enumerate(stages):
        a_arr, s_arr, cum = _stage_arrays(kind, m, q)
        u = rng.random(cnt) * cum[-1]
        col = np.searchsorted(cum, u, side="right")
        np.minimum(col, len(cum) - 1, out=col)
        ks[:, t] = col
        tabs.append((a_arr.tolist(), s_arr.tolist()))
    return _decode_rows(kind, n, stages, ks, tabs)


def _decode_rows(kind, n, stages, ks, tabs) -> np.ndarray:
    isD = kind == "D"
    W = np.empty((len(ks), n), dtype=np.int64)
    for r, row in enumerate(ks.tolist()):
        labels = list(range(1, n + 1))
        for t, m in enumerate(stages):
            a_list, s_list = tabs[t]
            k = row[t]
            a, s = a_list[k], s_list[k]
            W[r, m - 1] = s * labels.pop(a - 1)
            if isD and s < 0:
                labels[0] = -labels[0]
        if isD:
            W[r, 0] = labels[0]
    return W


def _uniform_windows(kind: str, n: int, cnt: int, rng) -> np.ndarray:
    perm = np.argsort(rng.random((cnt, n)), axis=1).astype(np.int64) + 1
    if kind == "A":
        return perm
    signs = rng.integers(0, 2, size=(cnt, n), dtype=np.int64) * 2 - 1
    if kind == "D":
        # parity-fix the last column; the first n-1 iid signs stay uniform
        # over the even-weight sign vectors
        signs[:, -1] = np.prod(signs[:, :-1], axis=1)
    return perm * signs


def _a_geometric_windows(n: int, q: float, cnt: int, rng) -> np.ndarray:
    """Type A fast path for q < 1: truncated-geometric inversion counts.

    Stage m contributes c in 0..m-1 with P(c) proportional to q^c; the
    value placed at position m is the (m-c)-th smallest remaining label.
    """
    logq = math.log(q)
    cs = np.empty((cnt, n), dtype=np.int64)
    for t, m in enumerate(range(n, 0, -1)):
        u = rng.random(cnt)
        c = np.floor(np.log1p(-u * (1.0 - q**m)) / logq).astype(np.int64)
        np.clip(c, 0, m - 1, out=c)
        cs[:, t] = c
    W = np.empty((cnt, n), dtype=np.int64)
    for r, row in enumerate(cs.tolist()):
        labels = list(range(1, n + 1))
        for t, m in enumerate(range(n, 0, -1)):
            W[r, m - 1] = labels.pop(m - 1 - row[t])
    return W


def _dihedral_stat_values(g: GroupDescriptor, statistic: str) -> np.ndarray:
    from .coxeter import descent_number, two_sided_descent

    elems, lengths = _dihedral_elements(g.rank)
    if statistic == "length":
        return lengths.astype(np.int64)
    if statistic == "t":
        return np.array([two_sided_descent(w, g) for w in elems], dtype=np.int64)
    if statistic == "des":
        return np.array([descent_number(w, g) for w in elems], dtype=np.int64)
    if statistic == "des_inv":
        return np.array(
            [descent_number(w, g, side="left") for w in elems], dtype=np.int64
        )
    raise ValueError(f"unknown statistic {statistic!r}")


def _windows_stat(kind: str, W: np.ndarray, statistic: str) -> np.ndarray:
    if statistic == "t":
        return windows_two_sided(kind, W)
    if statistic == "des":
        return windows_descent_counts(kind, W)
    if statistic == "des_inv":
        return windows_descent_counts(kind, windows_invert(W))
    if statistic == "length":
        return windows_lengths(kind, W)
    raise ValueError(f"unknown statistic {statistic!r}")


def sample_statistic(
    spec: MallowsSpec, statistic: str, count: int, seed, threads: int = 1
) -> np.ndarray:
    """Seeded batch of statistic values; sums over product factors."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    factor_seeds = seq.spawn(len(descriptor_factors(spec.group)))
    total = np.zeros(count, dtype=np.int64)
    for (g, q), child in zip(spec.factor_specs(), factor_seeds):
        if g.kind == "I2":
            vals = _dihedral_stat_values(g, statistic)
            total += _sample_dihedral_indices(g, q, count, child, threads, vals)
        else:
            W = sample_windows(g, q, count, child, threads)
            total += _windows_stat(g.kind, W, statistic)
    return total


def _sample_dihedral_indices(g, q, count, seq, threads, vals) -> np.ndarray:
    _, probs = _dihedral_table(g.rank, q)
    sizes = _chunk_sizes(count) if count else []
    children = seq.spawn(len(sizes)) if sizes else []

    def worker(cnt, child):
        rng = np.random.default_rng(child)
        idx = rng.choice(len(probs), size=cnt, p=probs)
        return vals[idx]

    if not sizes:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(_run_chunks(worker, sizes, children, threads))


def sample_elements(spec: MallowsSpec, count: int, seed, threads: int = 1) -> list:
    """Element-valued draws (desk scale); same stream as sample_statistic."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    factor_seeds = seq.spawn(len(descriptor_factors(spec.group)))
    cols = []
    for (g, q), child in zip(spec.factor_specs(), factor_seeds):
        if g.kind == "I2":
            elems, _ = _dihedral_elements(g.rank)
            idx = _sample_dihedral_indices(
                g, q, count, child, threads, np.arange(len(elems))
            )
            cols.append([elems[i] for i in idx])
        else:
            W = sample_windows(g, q, count, child, threads)
            cols.append([SignedPermutation(tuple(map(int, row))) for row in W])
    if len(cols) == 1:
        return cols[0]
    return [tuple(row) for row in zip(*cols)]


# ---------------------------------------------------------------------------
# identities and bounds checked against enumeration


def normalization_enumeration_check(g, q: float) -> CheckResult:
    """Closed-form Z(q) against the brute-force sum of q^length."""
    brute = 0.0
    for w in enumerate_group(g):
        brute += q ** length(w, g)
    closed = normalization_constant(g, q)
    rel = abs(brute - closed) / closed
    tol = 1e-10
    return CheckResult(
        name="normalization-constant",
        target=f"{g} q={q:g}",
        passed=rel <= tol,
        observed=rel,
        tolerance=tol,
        detail={"closed_form": closed, "enumerated": brute},
    )


def reversal_identity_check(g, q: float, statistic: str = "t") -> CheckResult:
    """law_q(stat) must equal the reflected law at 1/q.

    Multiplying by the longest element reflects length about l(w0), descent
    number about n and the two-sided statistic about 2n, while turning the
    measure at q into the measure at 1/q.
    """
    from .moments import exact_distribution

    spec_q = MallowsSpec.make(g, q)
    spec_r = MallowsSpec.make(g, 1.0 / q)
    dist_q = exact_distribution(spec_q, statistic)
    dist_r = exact_distribution(spec_r, statistic)
    if statistic == "length":
        pivot = spec_q.group.longest_length()
    elif statistic in ("des", "des_inv"):
        pivot = spec_q.group.num_generators
    elif statistic == "t":
        pivot = 2 * spec_q.group.num_generators
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    reflected = {pivot - v: p for v, p in dist_r.items()}
    support = set(dist_q.support()) | set(reflected)
    tv = 0.5 * sum(abs(dist_q.prob(v) - reflected.get(v, 0.0)) for v in support)
    tol = 1e-12
    return CheckResult(
        name=f"reversal-{statistic}",
        target=str(spec_q),
        passed=tv <= tol,
        observed=tv,
        tolerance=tol,
    )


def pattern_probability_bound_check(
    g: GroupDescriptor, q: float, positions, values
) -> CheckResult:
    """P(w matches the pattern) <= q^l(w') / (tail of the normalization).

    The witness w' fills the free positions with the unused magnitudes in
    increasing order; for type D an odd number of negative pattern entries
    forces one sign flip, placed at the smallest free position.

    Stated for q <= 1 (for q > 1 elements longer than the witness carry more
    weight, not less, and the inequality genuinely fails).
    """
    if g.kind not in ("B", "D"):
        raise ValueError("pattern bound applies to types B and D")
    if q > 1:
        raise ValueError("pattern bound is stated for q <= 1")
    n = g.window_size
    positions = tuple(positions)
    values = tuple(values)
    if len(positions) != len(values):
        raise ValueError("need matching position and value tuples")
    if not positions:
        return CheckResult(
            name="pattern-probability-bound",
            target=f"{g} q={q:g} empty pattern",
            passed=True,
            observed=1.0,
            bound=1.0,
        )
    if len(set(positions)) != len(positions) or not all(
        1 <= c <= n for c in positions
    ):
        raise ValueError(f"positions must be distinct and within 1..{n}")
    mags = [abs(v) for v in values]
    if len(set(mags)) != len(mags) or not all(1 <= a <= n for a in mags):
        raise ValueError("pattern values must use distinct magnitudes within range")
    k = len(positions)
    if g.kind == "D" and k >= n:
        raise ValueError("type D pattern bound needs at least one free position")

    win = [0] * n
    for c, v in zip(positions, values):
        win[c - 1] = v
    free_pos = [p for p in range(1, n + 1) if p not in set(positions)]
    free_vals = sorted(set(range(1, n + 1)) - set(mags))
    for p, v in zip(free_pos, free_vals):
        win[p - 1] = v
    if g.kind == "D" and sum(1 for v in values if v < 0) % 2 == 1:
        win[free_pos[0] - 1] = -win[free_pos[0] - 1]
    witness = SignedPermutation(tuple(win))

    num = 0.0
    den = 0.0
    hit_witness = False
    for w in enumerate_group(g):
        wt = q ** length(w, g)
        den += wt
        if all(w.window[c - 1] == v for c, v in zip(positions, values)):
            num += wt
            hit_witness = hit_witness or w == witness
    if not hit_witness:
        raise RuntimeError(f"witness {witness} does not match its own pattern")
    exact = num / den

    lw = length(witness, g)
    if g.kind == "B":
        bound = q**lw * q_even_double_factorial(n - k, q) / q_even_double_factorial(n, q)
    else:
        bound = (
            q**lw
            * q_integer(n - k, q)
            * q_even_double_factorial(n - k - 1, q)
            / (q_integer(n, q) * q_even_double_factorial(n - 1, q))
        )
    ok = exact <= bound * (1.0 + 1e-9) + 1e-15
    return CheckResult(
        name="pattern-probability-bound",
        target=f"{g} q={q:g} positions={positions} values={values}",
        passed=ok,
        observed=exact,
        bound=bound,
        detail={"witness": str(witness), "witness_length": lw},
    )
