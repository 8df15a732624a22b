"""Estimating the leaf-root correlation from observed counts.

With the root observed the maximum-likelihood estimate is closed form. With
the root hidden there are closed forms for two and three leaves, a
method-of-moments estimate for any number of leaves, and an EM algorithm
whose E- and M-steps collapse into one update of ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dependence import csd
from .errors import DomainError, NonIdentifiableError, NumericalError, UnsupportedError
from .model import ModelSpec, leaf_ones, leaf_sums, rho_to_alpha, root_posterior
from .tables import CountTable

# largest rho reported when the likelihood runs off to the rho -> 1 boundary
RHO_CAP = 1.0 - 1e-9

NON_IDENTIFIABLE = "non_identifiable"
NEGATIVE_CLAMPED = "negative_clamped"
BOUNDARY = "boundary"
NOT_CONVERGED = "not_converged"


@dataclass(frozen=True)
class Estimate:
    """A point estimate of ``rho``.

    ``raw`` is the unclamped statistic the estimator computes (``rho`` for
    the observed-root MLE, ``rho**2`` for the latent estimators).
    """

    method: str
    rho: float
    rho_sq: float
    raw: float
    flags: tuple = ()

    @property
    def alpha(self) -> float:
        return rho_to_alpha(self.rho)


def _leaves(counts: CountTable) -> CountTable:
    counts.require_n()
    return counts.leaves_only()


def _clamp_rho_sq(raw: float, cap: float) -> tuple[float, tuple]:
    if raw < 0:
        return 0.0, (NEGATIVE_CLAMPED, NON_IDENTIFIABLE)
    if raw == 0:
        return 0.0, (NON_IDENTIFIABLE,)
    if raw >= cap:
        return cap, (BOUNDARY,)
    return raw, ()


def mle_observed(counts: CountTable) -> Estimate:
    """Average of the leaf-root cross-sum differences; exact MLE when the root is observed."""
    if not counts.root_observed:
        raise DomainError("mle_observed needs the root column")
    counts.require_n()
    Q = counts.Q
    raw = sum(csd(counts.pair_counts(q, Q)) for q in range(Q)) / Q
    flags = ()
    rho = raw
    if raw < 0:
        rho, flags = 0.0, (NEGATIVE_CLAMPED,)
    elif raw >= 1.0:
        rho, flags = math.nextafter(1.0, 0.0), (BOUNDARY,)
    if rho == 0.0:
        flags = flags + (NON_IDENTIFIABLE,)
    return Estimate("observed", rho, rho * rho, raw, flags)


def leaf_sum_second_moment(counts: CountTable) -> float:
    """Uncentred second moment of the mean effect-coded leaf, ``sum n_t s_t**2 / (n Q**2)``."""
    leaves = _leaves(counts)
    Q = leaves.Q
    s = leaf_sums(Q).astype(float)
    return float(np.dot(leaves.counts, s * s) / (leaves.n * Q * Q))


def mom_estimate(counts: CountTable) -> Estimate:
    """Method of moments from ``Q Var(mean leaf) = 1 + (Q - 1) rho**2``."""
    leaves = _leaves(counts)
    Q = leaves.Q
    if Q < 2:
        raise NonIdentifiableError("rho is not identifiable from a single hidden-root leaf")
    v = leaf_sum_second_moment(leaves)
    raw = (Q * v - 1.0) / (Q - 1)
    rho_sq, flags = _clamp_rho_sq(raw, RHO_CAP * RHO_CAP)
    return Estimate("mom", math.sqrt(rho_sq), rho_sq, raw, flags)


def leaf_pair_csds(counts: CountTable) -> dict:
    """Cross-sum difference of every leaf pair, keyed by 0-based positions."""
    leaves = _leaves(counts)
    Q = leaves.Q
    return {
        (i, j): csd(leaves.pair_counts(i, j))
        for i in range(Q) for j in range(i + 1, Q)
    }


def closed_form_latent(counts: CountTable) -> Estimate:
    """Hidden-root MLE of ``rho**2`` for two or three leaves: the mean leaf-pair cross-sum difference."""
    leaves = _leaves(counts)
    if leaves.Q not in (2, 3):
        raise UnsupportedError(
            f"no closed form for Q={leaves.Q}; use em_fit for hidden roots with Q > 3"
        )
    values = list(leaf_pair_csds(leaves).values())
    raw = sum(values) / len(values)
    rho_sq, flags = _clamp_rho_sq(raw, RHO_CAP * RHO_CAP)
    return Estimate("closed", math.sqrt(rho_sq), rho_sq, raw, flags)


def _log_leaf_probs(rho, Q: int) -> np.ndarray:
    # log of (alpha**K + alpha**(Q-K)) / c_Q with c_Q = 2 (1 + alpha)**Q
    rho = np.asarray(rho, dtype=float)[..., None]
    log_alpha = np.log1p(rho) - np.log1p(-rho)
    log_one_plus_alpha = math.log(2.0) - np.log1p(-rho)
    K = leaf_ones(Q)
    return (np.logaddexp(K * log_alpha, (Q - K) * log_alpha)
            - math.log(2.0) - Q * log_one_plus_alpha)


def loglik(rho, counts: CountTable):
    """Marginal log-likelihood of the leaf counts; ``rho`` may be a scalar or an array."""
    leaves = counts.leaves_only()
    r = np.asarray(rho, dtype=float)
    if np.any(r < 0) or np.any(r >= 1):
        raise DomainError("rho must lie in [0, 1)")
    mask = leaves.counts > 0
    logp = _log_leaf_probs(r, leaves.Q)[..., mask]
    out = logp @ leaves.counts[mask]
    return float(out) if np.ndim(out) == 0 else out


def grid_mle_oracle(counts: CountTable, step: float = 1e-3) -> float:
    """Maximizer of :func:`loglik` over the grid ``0, step, ..., 1 - step``."""
    if not 0 < step <= 0.01:
        raise DomainError(f"grid step must lie in (0, 0.01], got {step!r}")
    grid = np.arange(int(round(1.0 / step))) * step
    grid = grid[grid < 1.0]
    values = loglik(grid, _leaves(counts))
    return float(grid[int(np.argmax(values))])


def em_estep(spec: ModelSpec, counts: CountTable) -> CountTable:
    """Split each leaf count between the root levels by the root's conditional distribution."""
    leaves = counts.leaves_only()
    if leaves.Q != spec.Q:
        raise DomainError(f"spec has Q={spec.Q} but counts have Q={leaves.Q}")
    strong = leaves.counts * root_posterior(spec)
    weak = leaves.counts - strong
    return CountTable(spec.Q, True, np.concatenate((weak, strong)))


def em_mstep(pseudo: CountTable) -> float:
    """``sum_t s_t (n(a_t, 1) - n(a_t, 0)) / (n Q)`` from a table with the root."""
    if not pseudo.root_observed:
        raise DomainError("M-step needs counts over leaves and root")
    pseudo.require_n()
    Q = pseudo.Q
    half = 1 << Q
    diff = pseudo.counts[half:] - pseudo.counts[:half]
    return float(np.dot(leaf_sums(Q), diff) / (pseudo.n * Q))


def T_term(alpha: float, s):
    """``s (alpha**s - 1) / (alpha**s + 1)``, written as ``s tanh(s log(alpha) / 2)``.

    Even in ``s`` and never negative for ``alpha >= 1``; the tanh form
    saturates at ``|s|`` instead of overflowing.
    """
    if not alpha >= 1.0:
        raise DomainError(f"alpha must be >= 1, got {alpha!r}")
    s = np.asarray(s)
    half_log = 0.5 * math.log(alpha)
    out = s * np.tanh(s * half_log)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EMConfig:
    tolerance: float = 1e-4
    max_iterations: int = 500
    init: float | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got {self.tolerance!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise DomainError(f"max_iterations must be >= 1, got {self.max_iterations!r}")
        if self.init is not None and not 0.0 < self.init < 1.0:
            raise DomainError(f"init must lie in (0, 1), got {self.init!r}")


@dataclass(frozen=True)
class EMStep:
    m: int
    rho: float
    alpha: float
    loglik: float


@dataclass
class EMTrace:
    """Iterates of an EM run; ``iterations[0]`` is the starting value."""

    iterations: list = field(default_factory=list)
    converged: bool = False
    final_rho: float = 0.0
    flags: tuple = ()

    @property
    def n_iterations(self) -> int:
        return len(self.iterations) - 1

    @property
    def final_alpha(self) -> float:
        return rho_to_alpha(self.final_rho)

    def logliks(self) -> np.ndarray:
        return np.array([step.loglik for step in self.iterations])

    def is_monotone(self, slack: float = 1e-10) -> bool:
        return bool(np.all(np.diff(self.logliks()) >= -slack))


def em_update(rho: float, counts: CountTable) -> float:
    """One EM step, ``rho(m+1) = sum_t T_t(m) n_t / (n Q)``."""
    leaves = counts.leaves_only()
    Q = leaves.Q
    T = T_term(rho_to_alpha(rho), leaf_sums(Q))
    return float(np.dot(T, leaves.counts) / (leaves.n * Q))


def em_fit(counts: CountTable, config: EMConfig = EMConfig()) -> EMTrace:
    """Maximize the hidden-root likelihood in ``rho`` by EM.

    Starts from the method-of-moments estimate (floored at 0.01, since
    ``rho = 0`` is itself a fixed point) unless ``config.init`` is given,
    and stops once successive iterates differ by less than
    ``config.tolerance``. If the likelihood at independence is at least as
    high as at the EM limit, the estimate is set to 0 and flagged as not
    identifiable.
    """
    leaves = _leaves(counts)
    Q = leaves.Q
    if Q < 2:
        raise NonIdentifiableError("rho is not identifiable from a single hidden-root leaf")
    flags = []
    if config.init is not None:
        rho = float(config.init)
    else:
        start = mom_estimate(leaves)
        rho = start.rho if start.rho_sq > 0 else 0.01
        rho = min(rho, RHO_CAP)

    trace = EMTrace()
    trace.iterations.append(EMStep(0, rho, rho_to_alpha(rho), loglik(rho, leaves)))
    for m in range(1, config.max_iterations + 1):
        new = em_update(rho, leaves)
        if not math.isfinite(new):
            raise NumericalError(f"EM update produced {new!r} at iteration {m}")
        if new >= RHO_CAP:
            new = RHO_CAP
            if BOUNDARY not in flags:
                flags.append(BOUNDARY)
        trace.iterations.append(EMStep(m, new, rho_to_alpha(new), loglik(new, leaves)))
        delta = abs(new - rho)
        rho = new
        if delta < config.tolerance:
            trace.converged = True
            break
    if not trace.converged:
        flags.append(NOT_CONVERGED)

    final = rho
    if loglik(0.0, leaves) >= trace.iterations[-1].loglik:
        final = 0.0
        flags.append(NON_IDENTIFIABLE)
    trace.final_rho = final
    trace.flags = tuple(flags)
    return trace


def derived_measures(rho: float) -> dict:
    """Measures implied by ``rho`` through their one-to-one maps."""
    alpha = rho_to_alpha(rho)
    return {
        "odds_ratio": alpha * alpha,
        "relative_chance": alpha,
        "chance_difference": rho,
        "leaf_correlation": rho * rho,
        "loglinear_two_factor": 0.5 * math.log(alpha),
    }
