"""Moments of descent statistics: exact laws, sampled laws, closed-form bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .coxeter import (
    descent_number,
    descriptor_factors,
    enumerate_group,
    length,
    two_sided_descent,
)
from .mallows import (
    MallowsSpec,
    _dihedral_elements,
    _dihedral_stat_values,
    q_integer,
    sample_statistic,
)
from .reports import CheckResult


# ---------------------------------------------------------------------------
# discrete distributions on integer support


@dataclass
class DiscreteDistribution:
    values: np.ndarray
    probs: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.values.ndim != 1 or self.values.shape != self.probs.shape:
            raise ValueError("support and mass must be matching 1-d arrays")
        if len(self.values) == 0:
            raise ValueError("empty distribution")
        if np.any(np.diff(self.values) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.probs < -1e-15):
            raise ValueError("negative probability")
        if abs(self.probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {self.probs.sum()}, not 1")

    @classmethod
    def from_weights(cls, weights: dict, provenance=None) -> "DiscreteDistribution":
        vals = sorted(weights)
        w = np.array([weights[v] for v in vals], dtype=np.float64)
        return cls(np.array(vals), w / w.sum(), provenance or {})

    @classmethod
    def from_samples(cls, xs: np.ndarray, provenance=None) -> "DiscreteDistribution":
        vals, counts = np.unique(np.asarray(xs, dtype=np.int64), return_counts=True)
        return cls(vals, counts / counts.sum(), provenance or {})

    def support(self):
        return [int(v) for v in self.values]

    def items(self):
        return [(int(v), float(p)) for v, p in zip(self.values, self.probs)]

    def prob(self, v) -> float:
        idx = np.searchsorted(self.values, v)
        if idx < len(self.values) and self.values[idx] == v:
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.values - m) ** 2, self.probs))

    def std(self) -> float:
        return math.sqrt(self.variance())

    def central_abs_moment(self, p: float) -> float:
        m = self.mean()
        return float(np.dot(np.abs(self.values - m) ** p, self.probs))

    def tv_distance(self, other: "DiscreteDistribution") -> float:
        vals = sorted(set(self.support()) | set(other.support()))
        return 0.5 * sum(abs(self.prob(v) - other.prob(v)) for v in vals)

    def size_bias(self) -> "DiscreteDistribution":
        """P*(x) = x P(x) / E; drops the zero atom."""
        m = self.mean()
        if m <= 0:
            raise ValueError("size-bias needs a positive mean")
        keep = self.values > 0
        return DiscreteDistribution(
            self.values[keep],
            self.values[keep] * self.probs[keep] / m,
            dict(self.provenance, size_bias=True),
        )

    def convolve(self, other: "DiscreteDistribution") -> "DiscreteDistribution":
        """Law of the sum of independent draws; supports are shifted ints."""
        lo = int(self.values[0] + other.values[0])
        a = np.zeros(int(self.values[-1] - self.values[0]) + 1)
        b = np.zeros(int(other.values[-1] - other.values[0]) + 1)
        a[self.values - self.values[0]] = self.probs
        b[other.values - other.values[0]] = other.probs
        c = np.convolve(a, b)
        vals = np.arange(lo, lo + len(c))
        keep = c > 0
        return DiscreteDistribution(vals[keep], c[keep] / c.sum())

    def summarize(self, count=None) -> "MomentSummary":
        return MomentSummary(
            mean=self.mean(),
            variance=self.variance(),
            third_central_abs=self.central_abs_moment(3),
            count=count,
        )

    def to_csv(self, path_or_file) -> None:
        fh = path_or_file if hasattr(path_or_file, "write") else open(path_or_file, "w")
        try:
            for k in sorted(self.provenance):
                fh.write(f"# {k}={self.provenance[k]}\n")
            fh.write("value,probability\n")
            for v, p in self.items():
                fh.write(f"{v},{p!r}\n")
        finally:
            if fh is not path_or_file:
                fh.close()

    @classmethod
    def from_csv(cls, path) -> "DiscreteDistribution":
        prov = {}
        vals, probs = [], []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    prov[key.strip()] = val.strip()
                    continue
                if line.startswith("value"):
                    continue
                v, p = line.split(",")
                vals.append(int(v))
                probs.append(float(p))
        return cls(np.array(vals), np.array(probs), prov)


@dataclass
class MomentSummary:
    mean: float
    variance: float
    third_central_abs: float
    count: int | None = None  # None marks an exact computation

    def __post_init__(self):
        if self.variance < 0 or self.third_central_abs < 0:
            raise ValueError("central moments cannot be negative")

    @property
    def se_mean(self) -> float | None:
        if self.count is None:
            return None
        return math.sqrt(self.variance / self.count)


# ---------------------------------------------------------------------------
# exact and empirical laws


def _statistic_value(w, g, statistic: str) -> int:
    if statistic == "t":
        return two_sided_descent(w, g)
    if statistic == "des":
        return descent_number(w, g)
    if statistic == "des_inv":
        return descent_number(w, g, side="left")
    if statistic == "length":
        return length(w, g)
    raise ValueError(f"unknown statistic {statistic!r}")


def exact_distribution(spec: MallowsSpec, statistic: str = "t") -> DiscreteDistribution:
    """Law of the statistic under the spec, by enumeration (plus convolution
    across product factors, all the statistics here being additive)."""
    out = None
    for g, q in spec.factor_specs():
        if g.kind == "I2":
            elems, lens = _dihedral_elements(g.rank)
            stat_vals = _dihedral_stat_values(g, statistic)
            weights = {}
            for ell, sv in zip(lens, stat_vals):
                weights[int(sv)] = weights.get(int(sv), 0.0) + q ** float(ell)
        else:
            weights = {}
            for w in enumerate_group(g):
                sv = _statistic_value(w, g, statistic)
                weights[sv] = weights.get(sv, 0.0) + q ** length(w, g)
        dist = DiscreteDistribution.from_weights(weights)
        out = dist if out is None else out.convolve(dist)
    out.provenance = {
        "group": str(spec.group),
        "q": ",".join(f"{q:g}" for q in spec.qs),
        "statistic": statistic,
        "provenance": "exact",
    }
    return out


def empirical_distribution(
    spec: MallowsSpec,
    statistic: str,
    count: int,
    seed,
    threads: int = 1,
):
    """Sampled law plus moment summary (with standard error of the mean)."""
    if count < 1:
        raise ValueError("need at least one sample")
    xs = sample_statistic(spec, statistic, count, seed, threads)
    dist = DiscreteDistribution.from_samples(
        xs,
        {
            "group": str(spec.group),
            "q": ",".join(f"{q:g}" for q in spec.qs),
            "statistic": statistic,
            "provenance": "empirical",
            "count": count,
            "seed": seed,
        },
    )
    return dist, dist.summarize(count=count)


# ---------------------------------------------------------------------------
# closed-form moments and bounds


def mean_two_sided(g, q: float) -> float:
    """E(des(w) + des(w^{-1})) = 2qn/(1+q), n the number of generators."""
    return 2.0 * q * g.num_generators / (1.0 + q)


@dataclass
class VarianceBounds:
    lower: float
    upper: float
    corollary_lower: float
    corollary_upper: float
    corollary_applicable: bool
    note: str = ""


def variance_bounds_two_sided(g, q: float) -> VarianceBounds:
    """Bounds on Var(t); q > 1 is folded to 1/q (the variance is invariant)."""
    if getattr(g, "kind", None) not in ("A", "B", "D"):
        raise ValueError("variance bounds are stated for irreducible types A, B, D")
    n = g.num_generators
    qq = min(q, 1.0 / q)
    denom = (1.0 + qq) ** 2 * (1.0 + qq + qq * qq)
    base_lower = 2.0 * n * qq * (1.0 - qq + qq * qq) / denom
    if g.kind == "A":
        lower = base_lower
        upper = (
            2.0 * n * qq * (1.0 + qq) ** 2 / q_integer(n, qq)
            + 2.0 * (n + 2) * qq * (1.0 - qq + qq * qq) / denom
        )
    elif g.kind == "B":
        lower = base_lower
        upper = 2.0 * n * qq * (2.0 + qq + 2.0 * qq * qq) / denom
    else:
        lower = base_lower - 10.0 * qq * qq / (1.0 + qq) ** 2
        upper = 4.0 * n * qq * (2.0 + 2.0 * qq + 3.0 * qq**2 + qq**3) / denom
    if g.kind == "D":
        co_lower = n * qq / 12.0
        co_upper = 8.0 * n * qq
        applicable = n >= 30
        note = "" if applicable else "simplified bounds need rank >= 30 in type D"
    else:
        co_lower = n * qq / 6.0
        co_upper = (4.0 if g.kind == "B" else 8.0) * n * qq
        applicable = True
        note = "" if n >= 2 else "stated for rank >= 2"
    return VarianceBounds(lower, upper, co_lower, co_upper, applicable, note)


def cube_moment_bound_check(
    g,
    q: float,
    mode: str = "exact",
    count: int = 100_000,
    seed=0,
    threads: int = 1,
) -> CheckResult:
    """E(des(w)^3) <= n^3 q^3/(1+q)^3 + 24 n^2 q^2/(1+q)^2 + 16 n q/(1+q)."""
    n = g.num_generators
    r = q / (1.0 + q)
    bound = (n * r) ** 3 + 24.0 * (n * r) ** 2 + 16.0 * n * r
    spec = MallowsSpec.make(g, q)
    if mode == "exact":
        dist = exact_distribution(spec, "des")
        third = float(np.dot(dist.values.astype(float) ** 3, dist.probs))
        slack = 0.0
    elif mode == "mc":
        xs = sample_statistic(spec, "des", count, seed, threads).astype(float) ** 3
        third = float(xs.mean())
        slack = 4.0 * float(xs.std(ddof=1)) / math.sqrt(count)
    else:
        raise ValueError("mode must be 'exact' or 'mc'")
    return CheckResult(
        name="cube-moment-bound",
        target=f"{spec} [{mode}]",
        passed=third <= bound + slack,
        observed=third,
        bound=bound,
        note=f"mc slack {slack:.3g}" if slack else "",
    )


def descent_indicator_mean_check(g, q: float) -> CheckResult:
    """P(des_i(w) = 1) must be exactly q/(1+q), every generator, both sides."""
    from .coxeter import descent_indicator

    target = q / (1.0 + q)
    worst = 0.0
    weights_total = 0.0
    hits = {}
    for w in enumerate_group(g):
        wt = q ** length(w, g)
        weights_total += wt
        for i in range(g.num_generators):
            for side in ("right", "left"):
                if descent_indicator(w, i, g, side):
                    hits[(i, side)] = hits.get((i, side), 0.0) + wt
    for i in range(g.num_generators):
        for side in ("right", "left"):
            p = hits.get((i, side), 0.0) / weights_total
            worst = max(worst, abs(p - target) / target)
    tol = 1e-10
    return CheckResult(
        name="descent-indicator-mean",
        target=f"{g} q={q:g}",
        passed=worst <= tol,
        observed=worst,
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# goodness of fit


def _merge_bins(observed: np.ndarray, expected: np.ndarray, min_expected: float):
    """Pool adjacent support cells until every expected count clears the floor."""
    obs_bins, exp_bins = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if exp_bins:
            obs_bins[-1] += acc_o
            exp_bins[-1] += acc_e
        else:
            obs_bins.append(acc_o)
            exp_bins.append(acc_e)
    return np.array(obs_bins), np.array(exp_bins)


def goodness_of_fit(
    samples: np.ndarray, dist: DiscreteDistribution, min_expected: float = 5.0
):
    """Pearson chi-square of a sample against an exact law.

    Returns (statistic, dof, p-value).  Support cells are pooled so every
    expected count is at least min_expected.
    """
    xs = np.asarray(samples, dtype=np.int64)
    n = len(xs)
    support = dist.values
    outside = ~np.isin(xs, support)
    if outside.any():
        return math.inf, len(support) - 1, 0.0
    observed = np.array([(xs == v).sum() for v in support], dtype=float)
    expected = dist.probs * n
    obs_b, exp_b = _merge_bins(observed, expected, min_expected)
    if len(obs_b) < 2:
        return 0.0, 0, 1.0
    stat, p = sps.chisquare(obs_b, exp_b * (obs_b.sum() / exp_b.sum()))
    return float(stat), len(obs_b) - 1, float(p)


def two_sample_chi_square(xs: np.ndarray, ys: np.ndarray, min_total: float = 10.0):
    """Pearson test that two integer samples share a law; returns (stat, dof, p)."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    support = np.unique(np.concatenate([xs, ys]))
    cx = np.array([(xs == v).sum() for v in support], dtype=float)
    cy = np.array([(ys == v).sum() for v in support], dtype=float)
    totals = cx + cy
    bx, by = [], []
    acc_x = acc_y = acc_t = 0.0
    for a, b, t in zip(cx, cy, totals):
        acc_x += a
        acc_y += b
        acc_t += t
        if acc_t >= min_total:
            bx.append(acc_x)
            by.append(acc_y)
            acc_x = acc_y = acc_t = 0.0
    if acc_t > 0 and bx:
        bx[-1] += acc_x
        by[-1] += acc_y
    elif acc_t > 0:
        bx.append(acc_x)
        by.append(acc_y)
    table = np.array([bx, by])
    if table.shape[1] < 2:
        return 0.0, 0, 1.0
    stat, p, dof, _ = sps.chi2_contingency(table)
    return float(stat), int(dof), float(p)
