"""Gaussian mean estimation: W is the sample mean of n draws from N(mu, sigma^2).

The chain adds shrinking Gaussian noise to W and shrinks toward mu,

    W_k - mu = alpha_k (W - mu + N_k),   alpha_k = 1 / (1 + 2^-k),

where N_k ~ N(0, sigma^2 / (2^k n)) is the sum of independent pieces N'_i,
i > k, with variance sigma^2 / (2^i n). Under the metric
d^2(w, v) = 4 sigma^2 (w - v)^2 / n the generalization process is
sub-Gaussian, and every level quantity has a closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from stochastic_chaining.chain_core import (
    NEG_INF,
    BoundReport,
    ChainDomainError,
    ChainLevel,
    ChainSpec,
    TruncationPolicy,
    evaluate_mi_bound,
    expand_chain,
)

DEFAULT_WINDOW = 60

# series constants: the bounds are strictly below these multiples of sigma^2/n
THM1_CONSTANT = 13.0
THM2_CONSTANT = 11.0


@dataclass(frozen=True)
class GaussianParams:
    mu: float = 0.0
    sigma: float = 1.0
    n: int = 2

    def __post_init__(self):
        if not self.sigma > 0:
            raise ChainDomainError(f"sigma must be > 0, got {self.sigma}")
        if int(self.n) != self.n or self.n < 1:
            raise ChainDomainError(f"n must be a positive integer, got {self.n}")

    @property
    def scale(self) -> float:
        """sigma^2 / n, the variance of W and the natural unit of every bound."""
        return self.sigma**2 / self.n


@dataclass(frozen=True)
class GaussianChainLevelAlgebra:
    k: int
    alpha_k: float
    sigma_k_sq: float


def level_algebra(params: GaussianParams, k: int, ratio: float = 2.0) -> GaussianChainLevelAlgebra:
    """Shrinkage and cumulative noise variance at level k.

    ``ratio`` is the per-level variance decay of the added noise; the bounds in
    this module assume the default of 2.
    """
    sigma_k_sq = params.scale * ratio ** (-k)
    return GaussianChainLevelAlgebra(k, 1.0 / (1.0 + ratio ** (-k)), sigma_k_sq)


def metric_sq(params: GaussianParams, w, v):
    """d^2(w, v) = 4 sigma^2 (w - v)^2 / n."""
    return 4.0 * params.sigma**2 * (w - v) ** 2 / params.n


def link_dist_sq_bound(params: GaussianParams, k: int) -> float:
    """Upper bound (sigma^4 / n^2) * 3 / (2^(k-1) + 1) on E[d^2(W_k, W_{k-1})]."""
    return params.scale**2 * 3.0 / (2.0 ** (k - 1) + 1.0)


def link_dist_sq_exact(params: GaussianParams, k: int) -> float:
    """Exact E[d^2(W_k, W_{k-1})] before the final relaxation step."""
    a = 2.0**k + 2.0
    alpha = 1.0 / (1.0 + 2.0 ** (-k))
    return 4.0 * params.scale**2 * (alpha / a**2 + 1.0 / (a * (1.0 + 2.0 ** (1 - k))))


def mi_level(k: int) -> float:
    """I(W; W_k) = 0.5 ln(1 + 2^k) nats, an upper bound on I(Z_[n]; W_k)."""
    return 0.5 * math.log1p(2.0**k)


def _require_two_samples(params):
    if params.n < 2:
        raise ChainDomainError(f"the individual-sample bound needs n >= 2, got {params.n}")


def mi_individual(params: GaussianParams, k: int) -> float:
    """I(Z_i; W_{i,k}) = -0.5 ln(1 - 1 / (n (1 + 2^-k))) for a single sample."""
    _require_two_samples(params)
    return -0.5 * math.log1p(-1.0 / (params.n * (1.0 + 2.0 ** (-k))))


def mi_individual_upper(params: GaussianParams, k: int) -> float:
    """min(ln(1 + 2^k) / (2n), ln 2 / n), the relaxation used in the series."""
    _require_two_samples(params)
    return min(math.log1p(2.0**k) / (2.0 * params.n), math.log(2.0) / params.n)


def _thm1_level(params):
    def level(k):
        return ChainLevel(k, link_dist_sq_bound(params, k), mi_upper=mi_level(k))

    return level


def _thm2_level(params):
    # per-sample metric 4 sigma^2 (w - v)^2 is n times larger, the 1/n average
    # over samples cancels it against n * mi_individual_upper
    def level(k):
        return ChainLevel(
            k,
            link_dist_sq_bound(params, k),
            mi_upper=params.n * mi_individual_upper(params, k),
        )

    return level


def chain_thm1(params: GaussianParams, truncation: TruncationPolicy = TruncationPolicy()) -> ChainSpec:
    return expand_chain(
        _thm1_level(params),
        NEG_INF,
        truncation,
        label=f"gaussian_thm1(sigma={params.sigma}, n={params.n})",
        initial_levels=DEFAULT_WINDOW,
    )


def chain_thm2(params: GaussianParams, truncation: TruncationPolicy = TruncationPolicy()) -> ChainSpec:
    _require_two_samples(params)
    return expand_chain(
        _thm2_level(params),
        NEG_INF,
        truncation,
        label=f"gaussian_thm2(sigma={params.sigma}, n={params.n})",
        initial_levels=DEFAULT_WINDOW,
    )


def bound_thm1(params: GaussianParams, truncation: TruncationPolicy = TruncationPolicy()) -> BoundReport:
    """Whole-sample bound (sigma^2/n) * sum_k sqrt(3 ln(1 + 2^k) / (2^(k-1) + 1))."""
    return evaluate_mi_bound(chain_thm1(params, truncation))


def bound_thm2(params: GaussianParams, truncation: TruncationPolicy = TruncationPolicy()) -> BoundReport:
    """Individual-sample bound (sigma^2/n) * sum_k sqrt(3 min(ln(1 + 2^k), 2 ln 2) / (2^(k-1) + 1)).

    Termwise no larger than :func:`bound_thm1`.
    """
    report = evaluate_mi_bound(chain_thm2(params, truncation))
    thm1 = bound_thm1(params, truncation)
    if report.total > thm1.total * (1 + 1e-12):
        raise AssertionError("individual-sample bound exceeds the whole-sample bound")
    return report


def true_generalization(params: GaussianParams) -> float:
    """The exact expected generalization error 2 sigma^2 / n."""
    return 2.0 * params.scale


def posterior_kl(params: GaussianParams, k: int, w_k):
    """D(P_{W | W_k = w_k} || P_W) for the Gaussian chain.

    Given W_k the mean W is Gaussian with mean w_k and variance
    (1 - alpha_k) sigma^2 / n. Since W_k sees the data only through the
    sufficient statistic W this equals D(P_{Z_[n] | W_k} || P_{Z_[n]}).
    """
    alpha = 1.0 / (1.0 + 2.0 ** (-k))
    s2 = params.scale
    return 0.5 * ((1.0 - alpha) + (w_k - params.mu) ** 2 / s2 - 1.0 - math.log1p(-alpha))
