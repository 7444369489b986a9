"""Monte Carlo and histogram estimators that check the closed forms independently.

Randomness is organized in fixed-size trial blocks. Block ``j`` draws from a
generator seeded by ``SeedSequence(seed, spawn_key=(j,))``, so every result is a
pure function of ``(seed, trials)`` no matter how many threads run the blocks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from stochastic_chaining import gaussian_mean as gm
from stochastic_chaining import phase_retrieval as pr
from stochastic_chaining.chain_core import ChainDomainError

BLOCK_SIZE = 1 << 16
THREADS_ENV = "STOCHASTIC_CHAINING_THREADS"
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    trials: int
    seed: int

    def within(self, target: float, n_se: float = 3.0) -> bool:
        return abs(self.value - target) <= n_se * self.std_error


def default_threads() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, "1")))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def _block_sizes(trials):
    full, rest = divmod(trials, BLOCK_SIZE)
    return [BLOCK_SIZE] * full + ([rest] if rest else [])


def _map_blocks(fn, trials, seed, threads):
    sizes = _block_sizes(trials)
    jobs = [(j, size) for j, size in enumerate(sizes)]

    def run(job):
        j, size = job
        return fn(block_rng(seed, j), size)

    threads = threads or default_threads()
    if threads == 1 or len(jobs) == 1:
        return [run(job) for job in jobs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(run, jobs))


def draw_samples(draw, trials: int, seed: int, threads: int | None = None) -> np.ndarray:
    """Concatenate ``draw(rng, size)`` over the trial blocks."""
    return np.concatenate(_map_blocks(draw, trials, seed, threads))


def _block_moments(draw):
    def fn(rng, size):
        x = np.asarray(draw(rng, size), dtype=float)
        mean = x.mean()
        return size, mean, float(((x - mean) ** 2).sum())

    return fn


def mc_mean(draw, trials: int, seed: int, threads: int | None = None) -> McEstimate:
    """Sample mean of ``draw`` with its standard error, merged block by block."""
    if trials < 2:
        raise ChainDomainError("need at least two trials")
    n, mean, m2 = 0, 0.0, 0.0
    # merge order is the block order, independent of how blocks were scheduled
    for nb, mb, m2b in _map_blocks(_block_moments(draw), trials, seed, threads):
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    sd = math.sqrt(m2 / (n - 1))
    return McEstimate(float(mean), sd / math.sqrt(n), int(n), int(seed))


# ---------------------------------------------------------------------------
# samplers


class GaussianMeanSampler:
    """W = sample mean of n draws from N(mu, sigma^2), with the Gaussian chain."""

    name = "gaussian"

    def __init__(self, mu: float = 0.0, sigma: float = 1.0, n: int = 10):
        self.params = gm.GaussianParams(mu, sigma, n)

    def __repr__(self):
        p = self.params
        return f"GaussianMeanSampler(mu={p.mu}, sigma={p.sigma}, n={p.n})"

    def _data(self, rng, size):
        p = self.params
        return rng.normal(p.mu, p.sigma, size=(size, p.n))

    def gen(self, z, w):
        """gen_z(w): population risk sigma^2 + (w - mu)^2 minus the empirical risk."""
        p = self.params
        emp = ((w[:, None] - z) ** 2).mean(axis=1)
        return p.sigma**2 + (w - p.mu) ** 2 - emp

    def gen_values(self, rng, size):
        z = self._data(rng, size)
        return self.gen(z, z.mean(axis=1))

    def increment(self, rng, w, v, size):
        z = self._data(rng, size)
        return self.gen(z, np.full(size, w)) - self.gen(z, np.full(size, v))

    def metric(self, w, v):
        return math.sqrt(gm.metric_sq(self.params, w, v))

    def chain_levels(self, rng, k, size, w=None):
        """(W, W_k, W_{k-1}), with W_{k-1} built from W_k by the one-step recursion."""
        p = self.params
        if w is None:
            w = rng.normal(p.mu, math.sqrt(p.scale), size)
        a_k = 1.0 / (1.0 + 2.0 ** (-k))
        a_km1 = 1.0 / (1.0 + 2.0 ** (-(k - 1)))
        sd = math.sqrt(p.scale * 2.0 ** (-k))  # both N_k and N'_k have variance sigma^2 / (2^k n)
        w_k = p.mu + a_k * (w - p.mu + rng.normal(0.0, sd, size))
        w_km1 = p.mu + (a_km1 / a_k) * (w_k - p.mu) + a_km1 * rng.normal(0.0, sd, size)
        return w, w_k, w_km1

    def link_increment(self, rng, k, size):
        p = self.params
        w, w_k, w_km1 = self.chain_levels(rng, k, size)
        # gen_z(w) - gen_z(v) = 2 (w - v)(mean(z) - mu), and W is that mean
        return 2.0 * (w_k - w_km1) * (w - p.mu)

    def level_rhs(self, k):
        return math.sqrt(gm.link_dist_sq_bound(self.params, k)) * math.sqrt(2.0 * gm.mi_level(k))

    def source_and_level(self, rng, k, size):
        """(W, W_k): W is the sufficient statistic of the data."""
        w, w_k, _ = self.chain_levels(rng, k, size)
        return w, w_k

    def level_mi(self, k):
        return gm.mi_level(k)


class PhaseRetrievalSampler:
    """W = phase(Z) rotated by zeta; chain W_k = W + N_k on the circle.

    The metric is the arc length between angles, which dominates the Euclidean
    distance between the unit vectors and is what the chain's link bound uses.
    """

    name = "phase"

    def __init__(self, epsilon: float = 1 / 20, gamma: float = pr.DEFAULT_GAMMA, resolution: float = 1e-12):
        self.params = pr.PhaseParams(epsilon, gamma)
        self.resolution = resolution

    def __repr__(self):
        p = self.params
        return f"PhaseRetrievalSampler(epsilon={p.epsilon}, gamma={p.gamma})"

    def _draw_w(self, rng, size):
        z = rng.standard_normal((size, 2))
        phase = np.mod(np.arctan2(z[:, 1], z[:, 0]), TWO_PI)
        atom = rng.random(size) < self.params.epsilon
        zeta = np.where(atom, 0.0, rng.uniform(0.0, TWO_PI, size))
        return z, phase, np.mod(phase + zeta, TWO_PI)

    @staticmethod
    def _x(z, angle):
        return z[:, 0] * np.cos(angle) + z[:, 1] * np.sin(angle)

    def gen_values(self, rng, size):
        # population risk is 0 for any fixed angle, empirical risk is -<t(W), Z>
        z, _, w = self._draw_w(rng, size)
        return self._x(z, w)

    def increment(self, rng, w, v, size):
        z = rng.standard_normal((size, 2))
        return self._x(z, np.full(size, w)) - self._x(z, np.full(size, v))

    def metric(self, w, v):
        gap = abs(w - v) % TWO_PI
        return min(gap, TWO_PI - gap)

    def _noise(self, rng, i, size):
        half = self.params.gamma ** (-i) * math.pi
        return rng.uniform(-half, half, size)

    def chain_levels(self, rng, k, size):
        """(Z, phase(Z), W, W_k, W_{k-1}).

        N_k drops the pieces narrower than ``resolution`` radians.
        """
        z, phase, w = self._draw_w(rng, size)
        n_k = np.zeros(size)
        i = k + 1
        while self.params.gamma ** (-i) * math.pi > self.resolution:
            n_k += self._noise(rng, i, size)
            i += 1
        w_k = np.mod(w + n_k, TWO_PI)
        w_km1 = np.mod(w_k + self._noise(rng, k, size), TWO_PI)
        return z, phase, w, w_k, w_km1

    def link_increment(self, rng, k, size):
        z, _, _, w_k, w_km1 = self.chain_levels(rng, k, size)
        return self._x(z, w_k) - self._x(z, w_km1)

    def level_rhs(self, k):
        p = self.params
        return pr.link_length(p, k) * math.sqrt(2.0 * pr.mi_level_upper(p, k))

    def source_and_level(self, rng, k, size):
        """(phase(Z), W_k): the process depends on the data through its phase and norm,
        and W_k depends on it only through the phase."""
        _, phase, _, w_k, _ = self.chain_levels(rng, k, size)
        return phase, w_k

    def level_mi(self, k):
        return pr.mi_level_upper(self.params, k)


SAMPLERS = {"gaussian": GaussianMeanSampler, "phase": PhaseRetrievalSampler}


# ---------------------------------------------------------------------------
# operations


def mc_generalization(sampler, trials: int, seed: int, threads: int | None = None) -> McEstimate:
    """Monte Carlo estimate of the expected generalization error E[X_W]."""
    if trials < 100:
        raise ChainDomainError(f"need at least 100 trials, got {trials}")
    return mc_mean(sampler.gen_values, trials, seed, threads)


def _plugin_entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def histogram_mi(x_samples, y_samples, bins: int = 64, x_range=None, y_range=None) -> float:
    """Plug-in mutual information (nats) of the joint ``bins`` x ``bins`` histogram.

    Ranges default to the sample extremes; pass ``(0, 2 pi)`` for angles.
    """
    x = np.asarray(x_samples, dtype=float).ravel()
    y = np.asarray(y_samples, dtype=float).ravel()
    if x.shape != y.shape:
        raise ChainDomainError(f"sample length mismatch: {x.size} vs {y.size}")
    if bins < 8:
        raise ChainDomainError(f"need at least 8 bins, got {bins}")
    if x_range is None:
        x_range = (x.min(), x.max())
    if y_range is None:
        y_range = (y.min(), y.max())
    joint, _, _ = np.histogram2d(x, y, bins=bins, range=[x_range, y_range])
    mi = _plugin_entropy(joint.sum(1)) + _plugin_entropy(joint.sum(0)) - _plugin_entropy(joint.ravel())
    return max(mi, 0.0)


def histogram_entropy(samples, bins: int = 64, value_range=None) -> float:
    """Plug-in differential entropy of a 1-D histogram density estimate."""
    x = np.asarray(samples, dtype=float).ravel()
    if value_range is None:
        value_range = (x.min(), x.max())
    counts, edges = np.histogram(x, bins=bins, range=value_range)
    return _plugin_entropy(counts) + math.log(edges[1] - edges[0])


@dataclass(frozen=True)
class MgfCheck:
    lam: float
    empirical: float
    std_error: float
    ceiling: float
    passed: bool
    inconclusive: bool


def mgf_subgaussian_check(sampler, pair, lambda_grid, trials: int, seed: int, n_se: float = 5.0):
    """Compare the empirical MGF of X_w - X_v with exp(lambda^2 d^2(w, v) / 2)."""
    w, v = pair
    d = sampler.metric(w, v)
    if not d > 0:
        raise ChainDomainError("the pair must be at positive distance")
    if trials < 10_000:
        raise ChainDomainError(f"need at least 10^4 trials, got {trials}")
    diff = draw_samples(lambda rng, size: sampler.increment(rng, w, v, size), trials, seed)
    out = []
    for lam in lambda_grid:
        e = np.exp(lam * diff)
        emp = float(e.mean())
        se = float(e.std(ddof=1) / math.sqrt(trials))
        ceiling = math.exp(0.5 * lam * lam * d * d)
        inconclusive = emp > 0 and se / emp > 0.5
        passed = emp <= ceiling + n_se * se
        out.append(MgfCheck(float(lam), emp, se, ceiling, passed, inconclusive))
    return out


@dataclass(frozen=True)
class DvCheck:
    k: int
    mean_increment: float
    std_error: float
    rhs: float
    passed: bool


def dv_direction_check(sampler, level_k: int, trials: int, seed: int, n_se: float = 5.0) -> DvCheck:
    """E[X_{W_k} - X_{W_{k-1}}] against sqrt(E d^2) sqrt(2 I_k) at one chain level."""
    est = mc_mean(lambda rng, size: sampler.link_increment(rng, level_k, size), trials, seed)
    rhs = sampler.level_rhs(level_k)
    return DvCheck(level_k, est.value, est.std_error, rhs, est.value <= rhs + n_se * est.std_error)


def chain_consistency_ks(params: gm.GaussianParams, k: int, trials: int, seed: int):
    """Two-sample KS test: W_{k-1} via the one-step recursion vs. built directly.

    Returns the scipy KS result; a large p-value means no detectable difference.
    """
    sampler = GaussianMeanSampler(params.mu, params.sigma, params.n)
    rng_a, rng_b = block_rng(seed, 0), block_rng(seed, 1)
    _, _, via_recursion = sampler.chain_levels(rng_a, k, trials)
    a = 1.0 / (1.0 + 2.0 ** (-(k - 1)))
    w = rng_b.normal(params.mu, math.sqrt(params.scale), trials)
    direct = params.mu + a * (w - params.mu + rng_b.normal(0.0, math.sqrt(params.scale * 2.0 ** (1 - k)), trials))
    return stats.ks_2samp(via_recursion, direct)


def link_dist_sq_mc(params: gm.GaussianParams, k: int, trials: int, seed: int) -> McEstimate:
    """Monte Carlo E[d^2(W_k, W_{k-1})] over the simulated chain."""
    sampler = GaussianMeanSampler(params.mu, params.sigma, params.n)

    def draw(rng, size):
        _, w_k, w_km1 = sampler.chain_levels(rng, k, size)
        return gm.metric_sq(params, w_k, w_km1)

    return mc_mean(draw, trials, seed)


def gaussian_kl_terms(params: gm.GaussianParams, ks, trials: int, seed: int):
    """Per-level E[d(W_k, W_{k-1}) sqrt(2 D(P_{W|W_k} || P_W))] by Monte Carlo.

    Each level gets its own seed derived from ``(seed, k)``.
    """
    sampler = GaussianMeanSampler(params.mu, params.sigma, params.n)
    out = {}
    for k in ks:

        def draw(rng, size, k=k):
            _, w_k, w_km1 = sampler.chain_levels(rng, k, size)
            d = np.sqrt(gm.metric_sq(params, w_k, w_km1))
            kl = np.maximum(gm.posterior_kl(params, k, w_k), 0.0)
            return d * np.sqrt(2.0 * kl)

        level_seed = np.random.SeedSequence(seed, spawn_key=(1 << 20, k + (1 << 10))).generate_state(1)[0]
        out[k] = mc_mean(draw, trials, int(level_seed))
    return out


# ---------------------------------------------------------------------------
# validation suites

SUITES = ("mgf", "dv", "mi", "gen")
EXAMPLES = ("gaussian", "phase")
MI_SLACK = 0.02  # nats


def draw_pairs(draw, trials: int, seed: int, threads: int | None = None):
    """Like :func:`draw_samples` for a ``draw`` returning two aligned arrays."""
    parts = _map_blocks(lambda rng, size: np.stack(draw(rng, size)), trials, seed, threads)
    out = np.concatenate(parts, axis=1)
    return out[0], out[1]


def _sub_seed(seed, *key):
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def _suite_gen(example, trials, seed):
    if example == "gaussian":
        sampler, target = GaussianMeanSampler(0.0, 1.0, 50), gm.true_generalization(gm.GaussianParams(0.0, 1.0, 50))
    else:
        sampler, target = PhaseRetrievalSampler(1 / 20), pr.true_value(1 / 20)
    est = mc_generalization(sampler, trials or 100_000, seed)
    return [{
        "check": "gen",
        "sampler": repr(sampler),
        "value": est.value,
        "std_error": est.std_error,
        "target": target,
        "passed": est.within(target, 3.0),
    }]


def mgf_configurations(example, seed, pairs=4, scales=(0.25, 0.5, 1.0, 1.5, 2.0)):
    """``pairs`` random (w, v) pairs, each with lambda = scale / d(w, v): 20 checks by default."""
    rng = block_rng(_sub_seed(seed, 7), 0)
    sampler = GaussianMeanSampler(0.0, 1.0, 10) if example == "gaussian" else PhaseRetrievalSampler(1 / 20)
    configs = []
    while len(configs) < pairs:
        if example == "gaussian":
            w, v = rng.uniform(-2.0, 2.0, 2)
        else:
            w, v = rng.uniform(0.0, TWO_PI, 2)
        d = sampler.metric(float(w), float(v))
        if d < 0.1:
            continue
        configs.append(((float(w), float(v)), [s / d for s in scales]))
    return sampler, configs


def _suite_mgf(example, trials, seed):
    sampler, configs = mgf_configurations(example, seed)
    out = []
    for i, (pair, lams) in enumerate(configs):
        for chk in mgf_subgaussian_check(sampler, pair, lams, trials or 100_000, _sub_seed(seed, 8, i)):
            out.append({
                "check": "mgf",
                "pair": list(pair),
                "lambda": chk.lam,
                "empirical": chk.empirical,
                "std_error": chk.std_error,
                "ceiling": chk.ceiling,
                "inconclusive": chk.inconclusive,
                "passed": chk.passed,
            })
    return out


def _suite_dv(example, trials, seed):
    if example == "gaussian":
        sampler, ks = GaussianMeanSampler(0.0, 1.0, 10), (-2, 0, 2)
    else:
        sampler, ks = PhaseRetrievalSampler(1 / 20), (0, 1, 2)
    out = []
    for k in ks:
        chk = dv_direction_check(sampler, k, trials or 100_000, _sub_seed(seed, 9, k + 100))
        out.append({
            "check": "dv",
            "k": k,
            "mean_increment": chk.mean_increment,
            "std_error": chk.std_error,
            "rhs": chk.rhs,
            "passed": chk.passed,
        })
    return out


def _suite_mi(example, trials, seed):
    trials = trials or 10_000_000
    if example == "gaussian":
        sampler, ks, rng_kw = GaussianMeanSampler(0.0, 1.0, 5), (-2, 0, 2), {}
    else:
        # a large atom makes the level informations big enough to order reliably
        sampler, ks = PhaseRetrievalSampler(0.5, 2.0, resolution=1e-9), (0, 2, 4)
        rng_kw = {"x_range": (0.0, TWO_PI), "y_range": (0.0, TWO_PI)}
    out = []
    prev = -math.inf
    for k in ks:
        x, y = draw_pairs(lambda rng, size, k=k: sampler.source_and_level(rng, k, size), trials, _sub_seed(seed, 10, k + 100))
        est = histogram_mi(x, y, 64, **rng_kw)
        closed = sampler.level_mi(k)
        row = {"check": "mi_dpi", "k": k, "histogram_mi": est, "closed_form": closed, "passed": est <= closed + MI_SLACK}
        out.append(row)
        if example == "phase":
            out.append({"check": "mi_order", "k": k, "histogram_mi": est, "previous": prev, "passed": est >= prev})
            prev = est
    return out


def run_suite(suite: str, example: str, trials: int | None = None, seed: int = 0) -> dict:
    """Run one validation suite; ``trials`` of None picks the suite default."""
    if suite not in SUITES:
        raise ChainDomainError(f"unknown suite {suite!r}")
    if example not in EXAMPLES:
        raise ChainDomainError(f"unknown example {example!r}")
    runner = {"gen": _suite_gen, "mgf": _suite_mgf, "dv": _suite_dv, "mi": _suite_mi}[suite]
    checks = runner(example, trials, seed)
    return {
        "suite": suite,
        "example": example,
        "seed": seed,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
    }
