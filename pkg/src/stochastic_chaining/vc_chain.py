"""Deterministic chaining over a finite binary hypothesis class.

Given two samples Z+ and Z- of size n, hypotheses are compared through the
empirical metric

    d^2(w, u) = (2/n) sum_i (l(w, z+_i) - l(u, z+_i))^2 + (2/n) sum_i (l(w, z-_i) - l(u, z-_i))^2

and covered by 2^-k nets for k = k0 .. k1. Mapping every hypothesis to its
nearest net center, level by level, gives a chain whose bound
sum_k 2^(-k+1) sqrt(2 ln |P_k|) controls the symmetrized Rademacher process.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from stochastic_chaining.chain_core import (
    ChainLevel,
    ChainSpec,
    TruncationPolicy,
    evaluate_mi_bound,
)

_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FiniteClass:
    """Hypotheses as 0/1 label vectors over a fixed set of instances 0..m-1."""

    hypotheses: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        h = np.asarray(self.hypotheses, dtype=np.int8)
        if h.ndim != 2 or h.shape[0] == 0:
            raise ValueError("hypotheses must be a nonempty 2-D array of label vectors")
        if not np.isin(h, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        _, first = np.unique(h, axis=0, return_index=True)
        h = h[np.sort(first)]
        h.setflags(write=False)
        object.__setattr__(self, "hypotheses", h)

    def __len__(self):
        return self.hypotheses.shape[0]

    @property
    def m(self) -> int:
        return self.hypotheses.shape[1]

    @classmethod
    def thresholds(cls, m: int) -> "FiniteClass":
        """h_t(x) = 1[x >= t] for t = 0..m."""
        idx = np.arange(m)
        return cls(np.array([(idx >= t) for t in range(m + 1)]), "thresholds")

    @classmethod
    def intervals(cls, m: int) -> "FiniteClass":
        """h_{a,b}(x) = 1[a <= x < b]; the empty interval appears once."""
        idx = np.arange(m)
        rows = [(idx >= a) & (idx < b) for a in range(m + 1) for b in range(a, m + 1)]
        return cls(np.array(rows), "intervals")

    @classmethod
    def from_file(cls, path) -> "FiniteClass":
        """Read a JSON list of label vectors, or whitespace/comma separated 0/1 rows."""
        with open(path) as fh:
            text = fh.read()
        try:
            rows = json.loads(text)
        except json.JSONDecodeError:
            rows = [[int(t) for t in line.replace(",", " ").split()] for line in text.splitlines() if line.strip()]
        return cls(np.array(rows), f"custom:{path}")


@dataclass(frozen=True, eq=False)
class EmpiricalMetricContext:
    """The two samples Z+ and Z-, as (instance index, label) arrays of length n."""

    x_plus: np.ndarray
    y_plus: np.ndarray
    x_minus: np.ndarray
    y_minus: np.ndarray

    @property
    def n(self) -> int:
        return len(self.x_plus)

    @classmethod
    def sample(cls, rng, cls_: FiniteClass, n: int, noise: float = 0.2, target: int | None = None):
        """x uniform on the instances, y = target hypothesis with labels flipped w.p. ``noise``."""
        t = cls_.hypotheses[len(cls_) // 2 if target is None else target]

        def draw():
            x = rng.integers(0, cls_.m, n)
            flip = rng.random(n) < noise
            return x, (t[x] ^ flip).astype(np.int8)

        xp, yp = draw()
        xm, ym = draw()
        return cls(xp, yp, xm, ym)

    def losses(self, cls_: FiniteClass):
        """0/1 loss matrices of shape (|class|, n) on Z+ and Z-."""
        h = cls_.hypotheses
        lp = (h[:, self.x_plus] != self.y_plus).astype(float)
        lm = (h[:, self.x_minus] != self.y_minus).astype(float)
        return lp, lm

    def distance_matrix(self, cls_: FiniteClass) -> np.ndarray:
        lp, lm = self.losses(cls_)
        d2 = np.zeros((len(cls_), len(cls_)))
        for loss in (lp, lm):
            s = loss.sum(axis=1)
            # squared differences of 0/1 entries: a + b - 2ab
            d2 += s[:, None] + s[None, :] - 2.0 * loss @ loss.T
        return np.sqrt(np.maximum(d2 * 2.0 / self.n, 0.0))


@dataclass(frozen=True, eq=False)
class NetHierarchy:
    k0: int
    k1: int
    root: int
    nets: dict = field(default_factory=dict)
    assign: dict = field(default_factory=dict)
    dist: np.ndarray | None = None

    def net_size(self, k: int) -> int:
        return len(self.nets[k])

    def chain_of(self, w: int) -> dict:
        """W_k for k = k1 down to k0 when the learned hypothesis is ``w``."""
        out = {self.k1: int(self.assign[self.k1][w])}
        for k in range(self.k1 - 1, self.k0 - 1, -1):
            out[k] = int(self.assign[k][out[k + 1]])
        return out


def _greedy(dist, radius, initial=()):
    centers = list(initial)
    covered = np.zeros(dist.shape[0], dtype=bool)
    for c in centers:
        covered |= dist[c] <= radius + _TOL
    while not covered.all():
        c = int(np.argmin(covered))  # lowest uncovered index
        centers.append(c)
        covered |= dist[c] <= radius + _TOL
    return sorted(centers)


def greedy_cover(cls_: FiniteClass, ctx: EmpiricalMetricContext, radius: float, initial=()):
    """Greedy radius-net: repeatedly add the lowest-index uncovered hypothesis.

    ``initial`` centers are kept and only the remainder is covered greedily.
    """
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    return _greedy(ctx.distance_matrix(cls_), radius, initial)


def _assign(dist, net):
    net = np.asarray(sorted(net))
    # argmin takes the first minimum, so ties go to the lowest-index center
    return net[np.argmin(dist[:, net], axis=1)]


def hierarchy_from_distances(dist: np.ndarray) -> NetHierarchy:
    ecc = dist.max(axis=1)
    root = int(np.argmin(ecc))
    radius0 = ecc[root]
    n_distinct = len({tuple(row) for row in (dist <= _TOL)})
    if radius0 <= _TOL:
        net = (root,)
        return NetHierarchy(0, 0, root, {0: net}, {0: _assign(dist, net)}, dist)
    k0 = math.floor(-math.log2(radius0))
    while 2.0 ** (-k0) < radius0 - _TOL:
        k0 -= 1
    nets = {k0: (root,)}
    k = k0
    while len(nets[k]) < n_distinct:
        k += 1
        nets[k] = tuple(_greedy(dist, 2.0 ** (-k), nets[k - 1]))
    assign = {j: _assign(dist, net) for j, net in nets.items()}
    return NetHierarchy(k0, k, root, nets, assign, dist)


def build_hierarchy(cls_: FiniteClass, ctx: EmpiricalMetricContext) -> NetHierarchy:
    """Nested greedy nets from a single root (level k0) to full separation (level k1).

    Each level starts from the previous level's centers, so nets are nested and
    their sizes nondecreasing.
    """
    return hierarchy_from_distances(ctx.distance_matrix(cls_))


def hierarchy_chain(h: NetHierarchy) -> ChainSpec:
    """The hierarchy as a chain: link length 2^(-k+1), information at most ln |P_k|."""
    levels = tuple(
        ChainLevel(k, (2.0 ** (-k + 1)) ** 2, mi_upper=math.log(h.net_size(k))) for k in range(h.k0 + 1, h.k1 + 1)
    )
    return ChainSpec(levels, h.k0, TruncationPolicy(tail_majorant="none"), label="vc_hierarchy")


def covering_bound(h: NetHierarchy) -> float:
    """sum_{k=k0+1}^{k1} 2^(-k+1) sqrt(2 ln |P_k|), a bound on E[X_W | Z+, Z-]."""
    if h.k1 == h.k0:
        return 0.0
    return evaluate_mi_bound(hierarchy_chain(h)).total


def rademacher_erm(cls_: FiniteClass, ctx: EmpiricalMetricContext, rng, trials: int):
    """X_W for ERM-selected W over ``trials`` sign draws, conditional on Z+ and Z-.

    Sign +1 puts z-_i in the training set and z+_i in the ghost set, sign -1
    the reverse, so X_W = (ghost loss - training loss) / sqrt(n).
    """
    lp, lm = ctx.losses(cls_)
    n = ctx.n
    r = rng.choice(np.array([-1.0, 1.0]), size=(trials, n))
    plus = (r > 0).astype(float)
    train = plus @ lm.T + (1.0 - plus) @ lp.T
    w = np.argmin(train, axis=1)
    x_all = r @ (lp - lm).T / math.sqrt(n)
    return x_all[np.arange(trials), w]


def vc_dimension(cls_: FiniteClass, max_instances: int = 20) -> int:
    """Largest instance subset shattered by the class, by exhaustive search."""
    if cls_.m > max_instances:
        raise ValueError(f"exhaustive search is limited to {max_instances} instances")
    h = cls_.hypotheses
    best = 0
    for d in range(1, cls_.m + 1):
        if 2**d > len(cls_):
            break
        if any(len({tuple(row) for row in h[:, cols]}) == 2**d for cols in itertools.combinations(range(cls_.m), d)):
            best = d
        else:
            break
    return best


@dataclass(frozen=True)
class VcRow:
    n: int
    covering_bound_over_sqrt_n: float
    mc_gen_estimate: float
    mc_std_error: float


def vc_experiment(cls_: FiniteClass, n: int, trials: int, seed: int, noise: float = 0.2) -> VcRow:
    """Average covering bound / sqrt(n) and the generalization gap under ERM.

    Each trial draws fresh Z+, Z- and one sign vector.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n,)))
    bounds = np.empty(trials)
    gens = np.empty(trials)
    for t in range(trials):
        ctx = EmpiricalMetricContext.sample(rng, cls_, n, noise)
        bounds[t] = covering_bound(build_hierarchy(cls_, ctx))
        gens[t] = rademacher_erm(cls_, ctx, rng, 1)[0]
    root_n = math.sqrt(n)
    return VcRow(
        n,
        float(bounds.mean() / root_n),
        float(gens.mean() / root_n),
        float(gens.std(ddof=1) / math.sqrt(trials) / root_n),
    )


def scaling_slope(rows) -> float:
    """Least-squares slope of log(bound / sqrt n) against log n."""
    x = np.log([r.n for r in rows])
    y = np.log([r.covering_bound_over_sqrt_n for r in rows])
    return float(np.polyfit(x, y, 1)[0])
