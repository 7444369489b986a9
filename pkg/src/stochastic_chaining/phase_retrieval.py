"""Toy phase retrieval on the unit circle.

Data Z ~ N(0, I_2), the process is X_t = <t, Z> for unit vectors t, and the
learner returns the phase of Z rotated by an independent zeta that is 0 with
probability epsilon and uniform on [0, 2 pi) otherwise. The chain perturbs W by
N_k = sum_{i > k} N'_i with N'_i uniform on [-gamma^-i pi, gamma^-i pi), so
consecutive links are at most gamma^-k pi apart along the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stochastic_chaining.chain_core import (
    BoundReport,
    ChainDomainError,
    ChainLevel,
    ChainSpec,
    TruncationPolicy,
    evaluate_mi_bound,
    expand_chain,
)
from stochastic_chaining.optim import golden_section

TWO_PI = 2.0 * math.pi
TABLE1_EPSILONS = (1 / 20, 1 / 30, 1 / 40, 1 / 50, 1 / 100, 1 / 200, 1 / 400)
DEFAULT_GAMMA = 3.75
BASELINE_GAMMA = 2.0

# terms shrink like gamma^-k; 1e-13 absolute keeps the tail far below the 4th decimal
_TRUNCATION = TruncationPolicy(abs_tol=1e-13, max_levels_each_side=400)


@dataclass(frozen=True)
class PhaseParams:
    epsilon: float
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if not self.gamma > 1:
            raise ChainDomainError(f"gamma must be > 1, got {self.gamma}")


@dataclass(frozen=True)
class PhaseBoundTerm:
    k: int
    mi_upper: float
    link_length: float


def _check_epsilon(epsilon):
    if not 0.0 <= epsilon <= 1.0:
        raise ChainDomainError(f"epsilon must lie in [0, 1], got {epsilon}")


def _xlogy(x, y):
    return 0.0 if x == 0.0 else x * math.log(y)


def mi_level_upper(p: PhaseParams, k: int) -> float:
    """log 2pi - h(N'_{k+1} + zeta), the upper bound on I(W_k; X) at level k.

    Closed form of the entropy of the two-piece density of N'_{k+1} + zeta.
    """
    eps = p.epsilon
    if eps == 0.0:
        return 0.0
    q = p.gamma ** (k + 1)
    val = _xlogy((1.0 - eps) * (1.0 - 1.0 / q), 1.0 - eps) + _xlogy(eps + (1.0 - eps) / q, q * eps + 1.0 - eps)
    return max(val, 0.0)


def two_piece_density(p: PhaseParams, k: int):
    """(half_width, inner_height, outer_height) of the density of N'_{k+1} + zeta on (-pi, pi]."""
    half = p.gamma ** (-(k + 1)) * math.pi
    inner = (p.gamma ** (k + 1) * p.epsilon + 1.0 - p.epsilon) / TWO_PI
    outer = (1.0 - p.epsilon) / TWO_PI
    return half, inner, outer


def two_piece_entropy(p: PhaseParams, k: int) -> float:
    """Differential entropy of the two-piece density, summed piece by piece."""
    half, inner, outer = two_piece_density(p, k)
    h = -2.0 * half * _xlogy(inner, inner)
    h -= (TWO_PI - 2.0 * half) * _xlogy(outer, outer)
    return h


def link_length(p: PhaseParams, k: int, chord: bool = False) -> float:
    """Distance bound between W_k and W_{k-1}: the arc gamma^-k pi, or its chord."""
    arc = p.gamma ** (-k) * math.pi
    if chord:
        return 2.0 * math.sin(min(arc, math.pi) / 2.0)
    return arc


def bound_terms(p: PhaseParams, depth: int, chord: bool = False):
    return [PhaseBoundTerm(k, mi_level_upper(p, k), link_length(p, k, chord)) for k in range(depth)]


def _chain(p, coefficient_length, label):
    def level(k):
        return ChainLevel(k, coefficient_length(k) ** 2, mi_upper=mi_level_upper(p, k))

    # the chain starts at W_{-1}, which is uniform on the circle and independent of Z
    return expand_chain(level, k_start=-1, truncation=_TRUNCATION, label=label, initial_levels=32)


def chain(p: PhaseParams, chord: bool = False) -> ChainSpec:
    return _chain(p, lambda k: link_length(p, k, chord), f"phase(eps={p.epsilon:g}, gamma={p.gamma:g})")


def bound(p: PhaseParams, chord: bool = False) -> BoundReport:
    """sqrt(2) pi sum_{k>=0} gamma^-k sqrt(mi_level_upper(k))."""
    return evaluate_mi_bound(chain(p, chord))


def baseline_report(epsilon: float) -> BoundReport:
    _check_epsilon(epsilon)
    p = PhaseParams(epsilon, BASELINE_GAMMA)
    # 6 sqrt(2) 2^-k sqrt(I) == sqrt((6 * 2^-k)^2) * sqrt(2 I)
    return evaluate_mi_bound(_chain(p, lambda k: 6.0 * 2.0 ** (-k), f"baseline(eps={epsilon:g})"))


def baseline_bound(epsilon: float) -> float:
    """Partition-chaining value 6 sqrt(2) sum_{k>=0} 2^-k sqrt(mi_level_upper(k)) at gamma = 2."""
    return baseline_report(epsilon).total


def true_value(epsilon: float) -> float:
    """E[X_W] = epsilon * E|Z| = epsilon * sqrt(pi / 2)."""
    _check_epsilon(epsilon)
    return epsilon * math.sqrt(math.pi / 2.0)


def optimize_gamma(epsilon: float, bracket=(1.5, 10.0), resolution: float = 0.01, chord: bool = False):
    """Minimize the bound over gamma: grid scan, then golden-section refinement.

    Returns ``(gamma_star, bound_at_star)``.
    """
    lo, hi = bracket
    if not (1.0 < lo < hi) or hi - lo < resolution:
        raise ChainDomainError(f"degenerate gamma bracket {bracket}")

    def f(g):
        return bound(PhaseParams(epsilon, g), chord).total

    grid = np.arange(lo, hi + 0.5 * resolution, resolution)
    values = np.array([f(g) for g in grid])
    i = int(np.argmin(values))
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, len(grid) - 1)]
    if b > a:
        g_star, v_star = golden_section(f, a, b, tol=1e-8)
        if v_star <= values[i]:
            return float(g_star), float(v_star)
    return float(grid[i]), float(values[i])


def table1(epsilons=TABLE1_EPSILONS):
    """Rows of (epsilon, baseline, stochastic at gamma 3.75, true value)."""
    return [
        (eps, baseline_bound(eps), bound(PhaseParams(eps, DEFAULT_GAMMA)).total, true_value(eps))
        for eps in epsilons
    ]
