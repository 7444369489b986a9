"""Chained generalization bounds from per-level chain statistics.

A stochastic chain W_{k0}, W_{k0+1}, ... of a learned hypothesis W is summarized
level by level: the expected squared distance between consecutive links and an
upper bound on the information the k-th link carries about the process. Those
numbers turn into a bound on E[X_W] through a chained series; this module owns
that series, its certified truncation, and the cumulant-generating-function
generalization through the Legendre dual.

All information quantities are in nats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

from stochastic_chaining.optim import golden_section

NEG_INF = float("-inf")
"""Sentinel for a chain that starts at k0 = -infinity."""

VARIANTS = ("mi_form", "kl_form", "cgf_form", "partition_form")
TAIL_MAJORANTS = ("geometric", "none")


class ChainDomainError(ValueError):
    """An operation was called on inputs outside its domain."""


class ChainInvariantError(ValueError):
    """A value violates a structural invariant (negative distance, non-convex cgf, ...)."""


def _check_nonneg(name, value):
    if value is None:
        return
    if not math.isfinite(value) or value < 0:
        raise ChainInvariantError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class ChainLevel:
    """One link of a chain.

    ``link_dist_sq`` is E[d^2(W_k, W_{k-1})], ``mi_upper`` bounds I(X; W_k) and
    ``kl_term`` is the per-level E[d * sqrt(2 KL)] used by the KL form.
    """

    k: int
    link_dist_sq: float
    mi_upper: Optional[float] = None
    kl_term: Optional[float] = None

    def __post_init__(self):
        _check_nonneg("link_dist_sq", self.link_dist_sq)
        _check_nonneg("mi_upper", self.mi_upper)
        _check_nonneg("kl_term", self.kl_term)


@dataclass(frozen=True)
class TruncationPolicy:
    abs_tol: float = 1e-10
    max_levels_each_side: int = 200
    tail_majorant: str = "geometric"

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ChainInvariantError(f"abs_tol must be > 0, got {self.abs_tol}")
        if self.max_levels_each_side < 1:
            raise ChainInvariantError("max_levels_each_side must be >= 1")
        if self.tail_majorant not in TAIL_MAJORANTS:
            raise ChainInvariantError(f"unknown tail majorant {self.tail_majorant!r}")


@dataclass(frozen=True)
class ChainSpec:
    levels: tuple
    k_start: float = NEG_INF
    truncation: TruncationPolicy = field(default_factory=TruncationPolicy)
    label: str = ""

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        ks = [lvl.k for lvl in levels]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ChainInvariantError("level indices must be strictly increasing")
        if levels and self.k_start != NEG_INF and ks[0] != self.k_start + 1:
            raise ChainInvariantError(
                f"first level must be k_start + 1 = {self.k_start + 1}, got {ks[0]}"
            )

    @property
    def two_sided(self) -> bool:
        return self.k_start == NEG_INF


@dataclass(frozen=True)
class BoundReport:
    variant: str
    total: float
    tail_bound: float
    per_level: tuple
    label: str = ""

    @property
    def guarantee(self) -> float:
        """The certified bound: partial sum plus the bound on what was left out."""
        return self.total + self.tail_bound

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "total": _round12(self.total),
            "tail_bound": _round12(self.tail_bound),
            "per_level": [[int(k), _round12(c)] for k, c in self.per_level],
            "label": self.label,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _round12(x):
    # 12 significant digits; non-finite values have no JSON literal
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


# ---------------------------------------------------------------------------
# series evaluation


def _side_tail(c_prev: float, c_last: float) -> float:
    """Geometric majorant for the tail beyond ``c_last``."""
    if c_last == 0.0:
        return 0.0
    if c_prev <= 0.0:
        return math.inf
    r = c_last / c_prev
    if r >= 1.0:
        return math.inf
    return c_last * r / (1.0 - r)


def _tail_bound(chain: ChainSpec, contribs: Sequence[float]) -> float:
    if chain.truncation.tail_majorant == "none":
        return 0.0
    if len(contribs) < 2:
        return math.inf
    tail = _side_tail(contribs[-2], contribs[-1])
    if chain.two_sided:
        tail += _side_tail(contribs[1], contribs[0])
    return tail


def _report(chain, variant, contribs):
    per_level = tuple((lvl.k, c) for lvl, c in zip(chain.levels, contribs))
    return BoundReport(
        variant=variant,
        total=math.fsum(contribs),
        tail_bound=_tail_bound(chain, contribs),
        per_level=per_level,
        label=chain.label,
    )


def _require_levels(chain: ChainSpec):
    if not chain.levels:
        raise ChainDomainError("chain has no levels")


def evaluate_mi_bound(chain: ChainSpec) -> BoundReport:
    """Sum of sqrt(E d^2) * sqrt(2 I) over the chain levels."""
    _require_levels(chain)
    contribs = []
    for lvl in chain.levels:
        if lvl.mi_upper is None:
            raise ChainDomainError(f"level {lvl.k} has no mi_upper")
        contribs.append(math.sqrt(lvl.link_dist_sq) * math.sqrt(2.0 * lvl.mi_upper))
    return _report(chain, "mi_form", contribs)


def evaluate_kl_bound(chain: ChainSpec) -> BoundReport:
    """Sum of the supplied per-level E[d sqrt(2 KL)] terms."""
    _require_levels(chain)
    contribs = []
    for lvl in chain.levels:
        if lvl.kl_term is None:
            raise ChainDomainError(f"level {lvl.k} has no kl_term")
        contribs.append(float(lvl.kl_term))
    return _report(chain, "kl_form", contribs)


def evaluate_partition_bound(chain: ChainSpec) -> BoundReport:
    """MI-form evaluation of a partition chain, tagged as such."""
    return replace(evaluate_mi_bound(chain), variant="partition_form")


def expand_chain(
    level_fn: Callable[[int], ChainLevel],
    k_start: float = NEG_INF,
    truncation: TruncationPolicy = TruncationPolicy(),
    label: str = "",
    evaluate: Callable[[ChainSpec], BoundReport] = evaluate_mi_bound,
    initial_levels: int = 60,
) -> ChainSpec:
    """Build a chain from ``level_fn`` over a window that grows until the tail is small.

    Two-sided chains use k in [-L, L]; chains with a finite start use
    k in [k_start + 1, k_start + L]. L starts at ``initial_levels`` and doubles
    until ``evaluate`` reports ``tail_bound <= abs_tol`` or L reaches
    ``truncation.max_levels_each_side``.
    """
    max_l = truncation.max_levels_each_side
    size = max(2, min(initial_levels, max_l))
    while True:
        if k_start == NEG_INF:
            ks = range(-size, size + 1)
        else:
            first = int(k_start) + 1
            ks = range(first, first + size)
        chain = ChainSpec(tuple(level_fn(k) for k in ks), k_start, truncation, label)
        if size >= max_l or evaluate(chain).tail_bound <= truncation.abs_tol:
            return chain
        size = min(2 * size, max_l)


def partition_chain(
    diam: float, k0: int, depth: int, truncation: TruncationPolicy = TruncationPolicy()
) -> ChainSpec:
    """Chain of nested 2^-k partitions: link distance 3 * 2^-k at level k.

    Mutual information is left unset; fill it with :func:`with_mi`.
    """
    if not diam > 0:
        raise ChainDomainError(f"diam must be > 0, got {diam}")
    if depth < 1:
        raise ChainDomainError(f"depth must be >= 1, got {depth}")
    if 2.0 ** (-k0) < diam:
        raise ChainDomainError(f"2^-k0 = {2.0 ** -k0} is below the diameter {diam}")
    levels = tuple(ChainLevel(k, (3.0 * 2.0 ** (-k)) ** 2) for k in range(k0 + 1, k0 + depth + 1))
    return ChainSpec(levels, k0, truncation, label=f"partition(diam={diam}, k0={k0})")


def with_mi(chain: ChainSpec, mi: Callable[[int], float] | Iterable[float]) -> ChainSpec:
    """Copy of ``chain`` with ``mi_upper`` filled from a callable of k or a sequence."""
    if callable(mi):
        values = [mi(lvl.k) for lvl in chain.levels]
    else:
        values = list(mi)
        if len(values) != len(chain.levels):
            raise ChainDomainError("need one mutual information value per level")
    levels = tuple(replace(lvl, mi_upper=float(v)) for lvl, v in zip(chain.levels, values))
    return replace(chain, levels=levels)


# ---------------------------------------------------------------------------
# cumulant generating functions


@dataclass(frozen=True)
class CgfSpec:
    """A convex psi on [0, b) with psi(0) = psi'(0) = 0."""

    psi: Callable[[float], float]
    b: float = math.inf

    def __post_init__(self):
        if not self.b > 0:
            raise ChainInvariantError(f"domain endpoint b must be > 0, got {self.b}")

    def check(self, n_grid: int = 200):
        """Raise ChainInvariantError unless psi passes the numerical sanity checks."""
        psi = self.psi
        if abs(psi(0.0)) > 1e-12:
            raise ChainInvariantError(f"psi(0) = {psi(0.0)} != 0")
        h = 1e-6 * min(1.0, self.b)
        if abs(psi(h) / h) > 1e-3:
            raise ChainInvariantError("right derivative of psi at 0 is not 0")
        top = min(10.0, 0.99 * self.b)
        step = top / (n_grid + 1)
        vals = [psi(i * step) for i in range(n_grid + 2)]
        for i in range(1, n_grid + 1):
            second = vals[i + 1] - 2.0 * vals[i] + vals[i - 1]
            scale = max(1.0, abs(vals[i + 1]), abs(vals[i - 1]))
            if second < -1e-9 * scale:
                raise ChainInvariantError(f"psi is not convex near lambda = {i * step:.4g}")

    @classmethod
    def quadratic(cls, variance: float = 1.0) -> "CgfSpec":
        """Sub-Gaussian cgf lambda^2 * variance / 2."""
        return cls(lambda lam: 0.5 * variance * lam * lam)

    @classmethod
    def sub_gamma(cls, variance: float = 1.0, scale: float = 1.0) -> "CgfSpec":
        """lambda^2 * variance / (2 (1 - scale * lambda)) on [0, 1/scale)."""
        return cls(lambda lam: variance * lam * lam / (2.0 * (1.0 - scale * lam)), 1.0 / scale)


_MAX_DOUBLINGS = 200


def _search_bracket(f, b):
    """Right end of an interval (0, hi) holding the minimizer of unimodal ``f`` on (0, b)."""
    if math.isfinite(b):
        return b
    h = 1.0
    for _ in range(_MAX_DOUBLINGS):
        if f(2.0 * h) > f(h):
            return 2.0 * h
        h *= 2.0
    raise ChainDomainError("could not bracket the optimum")


def _dual(cgf, x):
    if x == 0.0:
        return 0.0

    def neg(lam):
        return cgf.psi(lam) - lam * x

    hi = _search_bracket(neg, cgf.b)
    _, val = golden_section(neg, 0.0, hi, tol=1e-10)
    return max(0.0, -val)


def _dual_inverse(cgf, y):
    if y == 0.0:
        return 0.0

    def ratio(lam):
        return (y + cgf.psi(lam)) / lam

    hi = _search_bracket(ratio, cgf.b)
    _, val = golden_section(ratio, 0.0, hi, tol=1e-10 * min(1.0, hi))
    return val


def legendre_dual(cgf: CgfSpec, x: float) -> float:
    """psi*(x) = sup over lambda in [0, b) of lambda x - psi(lambda)."""
    if x < 0:
        raise ChainDomainError(f"x must be >= 0, got {x}")
    cgf.check()
    return _dual(cgf, float(x))


def legendre_dual_inverse(cgf: CgfSpec, y: float) -> float:
    """psi*^{-1}(y) = inf over lambda in (0, b) of (y + psi(lambda)) / lambda."""
    if y < 0:
        raise ChainDomainError(f"y must be >= 0, got {y}")
    cgf.check()
    return _dual_inverse(cgf, float(y))


def evaluate_cgf_bound(
    chain: ChainSpec, cgf: CgfSpec, sigma_k: Callable[[int], float]
) -> BoundReport:
    """Sum of sigma_k(k) * psi*^{-1}(I_k).

    ``sigma_k(k)`` must dominate the link distance at level k; that is the
    caller's responsibility and is not checked.
    """
    _require_levels(chain)
    cgf.check()
    contribs = []
    for lvl in chain.levels:
        if lvl.mi_upper is None:
            raise ChainDomainError(f"level {lvl.k} has no mi_upper")
        contribs.append(sigma_k(lvl.k) * _dual_inverse(cgf, lvl.mi_upper))
    return _report(chain, "cgf_form", contribs)
