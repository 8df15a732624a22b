"""Concentric-ring distributions over star graphs.

A model has ``Q`` binary leaves ``A_1..A_Q`` and one binary root ``L``, all
with equally probable levels. Every leaf depends on the root with the same
correlation ``rho``; the leaves are mutually independent given the root.

Cell indexing is shared by every module: for an index ``t`` in
``[0, 2**p)``, bit ``q`` (least significant first) is the 0/1 level of
variable ``q + 1``, and when the root is included it occupies the most
significant bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit

from .errors import CapacityError, DomainError, PatternOverflowError
from .tables import CountTable

MAX_VARIABLES = 30
UINT64_MAX = (1 << 64) - 1
_SAMPLE_CHUNK = 1 << 18


def rho_to_alpha(rho: float) -> float:
    """Odds parameter ``(1 + rho) / (1 - rho)`` of a symmetric pair."""
    rho = float(rho)
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"rho must lie in [0, 1), got {rho!r}")
    return (1.0 + rho) / (1.0 - rho)


def alpha_to_rho(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha >= 1.0 or math.isinf(alpha):
        raise DomainError(f"alpha must lie in [1, inf), got {alpha!r}")
    return (alpha - 1.0) / (alpha + 1.0)


@dataclass(frozen=True)
class ModelSpec:
    """One member of the family: ``Q`` leaves with dependence ``rho``.

    Build instances through :meth:`from_rho` or :meth:`from_alpha`; the
    other parameter is derived so both stay consistent.
    """

    Q: int
    rho: float
    alpha: float

    def __post_init__(self):
        if isinstance(self.Q, bool) or int(self.Q) != self.Q or self.Q < 1:
            raise DomainError(f"Q must be an integer >= 1, got {self.Q!r}")
        object.__setattr__(self, "Q", int(self.Q))
        if self.Q + 1 > MAX_VARIABLES:
            raise CapacityError(
                f"p = {self.Q + 1} variables needs 2**{self.Q + 1} cells; "
                f"at most {MAX_VARIABLES} variables are supported"
            )
        if not 0.0 <= self.rho < 1.0:
            raise DomainError(f"rho must lie in [0, 1), got {self.rho!r}")
        if not 1.0 <= self.alpha < math.inf:
            raise DomainError(f"alpha must lie in [1, inf), got {self.alpha!r}")
        if abs(alpha_to_rho(self.alpha) - self.rho) > 1e-12:
            raise DomainError(f"rho={self.rho!r} and alpha={self.alpha!r} disagree")

    @classmethod
    def from_rho(cls, Q: int, rho: float) -> "ModelSpec":
        return cls(Q, float(rho), rho_to_alpha(rho))

    @classmethod
    def from_alpha(cls, Q: int, alpha: float) -> "ModelSpec":
        return cls(Q, alpha_to_rho(alpha), float(alpha))

    @property
    def p(self) -> int:
        return self.Q + 1

    @property
    def c_Q(self) -> float:
        """Normalizing constant ``2 (1 + alpha)**Q``."""
        return 2.0 * (1.0 + self.alpha) ** self.Q

    @property
    def independent(self) -> bool:
        return self.rho == 0.0


@dataclass(frozen=True)
class ProbVector:
    """A probability vector over ``2**p`` level combinations."""

    p: int
    entries: np.ndarray
    root_included: bool = True

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (1 << self.p,):
            raise DomainError(f"expected {1 << self.p} entries, got shape {entries.shape}")
        if np.any(entries < 0) or not np.all(np.isfinite(entries)):
            raise DomainError("probabilities must be finite and nonnegative")
        total = entries.sum()
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    @property
    def Q(self) -> int:
        """Number of leaves represented."""
        return self.p - 1 if self.root_included else self.p

    def __len__(self):
        return len(self.entries)

    def is_jointly_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.entries - self.entries[::-1]) <= tol))


@dataclass(frozen=True)
class IndexStats:
    t: int
    K: int
    s: int


@lru_cache(maxsize=None)
def _popcounts(width: int) -> np.ndarray:
    counts = np.bitwise_count(np.arange(1 << width, dtype=np.uint32)).astype(np.int64)
    counts.flags.writeable = False
    return counts


def leaf_ones(Q: int) -> np.ndarray:
    """``K_t`` for every leaf index ``t < 2**Q``."""
    return _popcounts(Q)


def leaf_sums(Q: int) -> np.ndarray:
    """``s_t = 2 K_t - Q``, the leaf sum in -1/+1 coding, for every leaf index."""
    return 2 * _popcounts(Q) - Q


def levels(width: int) -> np.ndarray:
    """0/1 level matrix of shape ``(2**width, width)``; column ``q`` is bit ``q``."""
    t = np.arange(1 << width)
    return (t[:, None] >> np.arange(width)) & 1


def index_stats(t: int, Q: int) -> IndexStats:
    """Count of ones ``K`` and effect-coded sum ``s`` of the leaf bits of ``t``.

    ``t`` may carry a root bit at position ``Q``; it is masked out.
    """
    if Q < 1:
        raise DomainError(f"Q must be >= 1, got {Q}")
    if not 0 <= t < (1 << (Q + 1)):
        raise DomainError(f"index {t} out of range for Q={Q}")
    K = (t & ((1 << Q) - 1)).bit_count()
    return IndexStats(t=t, K=K, s=2 * K - Q)


def _joint_exponents(Q: int) -> np.ndarray:
    K = _popcounts(Q)
    # root weak: alpha**(Q - K); root strong: alpha**K
    return np.concatenate((Q - K, K))


def joint_vector_direct(spec: ModelSpec) -> ProbVector:
    """Joint table from the closed form ``alpha**K / c_Q`` (``alpha**(Q-K)`` at weak root)."""
    exps = _joint_exponents(spec.Q)
    return ProbVector(spec.p, spec.alpha ** exps.astype(float) / spec.c_Q, True)


def joint_vector_product(spec: ModelSpec) -> ProbVector:
    """Joint table as ``2**-p * prod_q (1 + rho a*_q l*)`` in effect coding."""
    Q = spec.Q
    t = np.arange(1 << spec.p)
    root = 2 * (t >> Q) - 1
    out = np.ones(t.shape)
    for q in range(Q):
        leaf = 2 * ((t >> q) & 1) - 1
        out *= 1.0 + spec.rho * leaf * root
    return ProbVector(spec.p, out / float(1 << spec.p), True)


def _kron_power(first: float, second: float, order: int) -> np.ndarray:
    # in-place doubling: the new factor's level becomes the next higher bit
    buf = np.empty(1 << order)
    buf[0] = 1.0
    size = 1
    for _ in range(order):
        np.multiply(buf[:size], second, out=buf[size:2 * size])
        buf[:size] *= first
        size *= 2
    return buf


def joint_vector_kron(spec: ModelSpec) -> ProbVector:
    """Joint table as ``(w x ... x w, v x ... x v) / c_Q`` with ``v=(1, alpha)``, ``w=(alpha, 1)``.

    Both halves are built by repeated doubling in ``O(2**p)`` time. Each
    factor is divided by ``1 + alpha`` as it is applied, so intermediate
    values stay in ``(0, 1]``.
    """
    Q, a = spec.Q, spec.alpha
    scale = 1.0 + a
    weak = _kron_power(a / scale, 1.0 / scale, Q)
    strong = _kron_power(1.0 / scale, a / scale, Q)
    return ProbVector(spec.p, np.concatenate((weak, strong)) / 2.0, True)


def integer_pattern(spec: ModelSpec) -> np.ndarray:
    """Exponents ``e_t`` with ``c_Q * pi_t = alpha**e_t`` for every joint cell."""
    return _joint_exponents(spec.Q).copy()


def strong_half_exponents(p: int) -> np.ndarray:
    """Exponents of the strong-root half of the joint table for ``p`` variables.

    These are the rows of the integer ladder that grows one variable at a
    time; ``p = 1`` gives the single entry ``0``.
    """
    if p < 1 or p > MAX_VARIABLES:
        raise DomainError(f"p must lie in [1, {MAX_VARIABLES}], got {p}")
    return _popcounts(p - 1).copy()


def integer_vector(spec: ModelSpec) -> tuple[int, ...]:
    """Exact integers ``c_Q * pi_t`` for integer ``alpha``.

    Raises :class:`PatternOverflowError` when the largest cell,
    ``alpha**Q``, does not fit an unsigned 64-bit integer.
    """
    if spec.alpha != int(spec.alpha):
        raise DomainError(f"integer cell values need integer alpha, got {spec.alpha!r}")
    a = int(spec.alpha)
    if a ** spec.Q > UINT64_MAX:
        raise PatternOverflowError(f"alpha**Q = {a}**{spec.Q} exceeds 2**64 - 1")
    return tuple(a ** int(e) for e in _joint_exponents(spec.Q))


def marginal_leaves(spec: ModelSpec) -> ProbVector:
    """Leaf distribution ``(alpha**K + alpha**(Q-K)) / c_Q`` after summing out the root."""
    joint = joint_vector_direct(spec).entries
    half = 1 << spec.Q
    return ProbVector(spec.Q, joint[:half] + joint[half:], root_included=False)


def root_posterior(spec: ModelSpec) -> np.ndarray:
    """``pr(L = 1 | a_t)`` for every leaf index ``t``.

    Equal to ``alpha**K / (alpha**K + alpha**(Q-K))``, evaluated as the
    logistic function of ``s_t log(alpha)`` so large exponents cannot overflow.
    """
    return expit(leaf_sums(spec.Q) * math.log(spec.alpha))


def conditional_root(spec: ModelSpec, leaf_levels) -> tuple[float, float]:
    """``(pr(L=0 | a), pr(L=1 | a))`` for one leaf level sequence ``a``."""
    bits = [int(b) for b in leaf_levels]
    if len(bits) != spec.Q or any(b not in (0, 1) for b in bits):
        raise DomainError(f"expected {spec.Q} levels in {{0, 1}}, got {leaf_levels!r}")
    s = 2 * sum(bits) - spec.Q
    strong = float(expit(s * math.log(spec.alpha)))
    weak = float(expit(-s * math.log(spec.alpha)))
    return weak, strong


def plan_sample_size(spec: ModelSpec) -> int:
    """Smallest ``n`` at which the rarest joint cell (probability ``1/c_Q``) expects one count."""
    if spec.alpha == int(spec.alpha):
        return 2 * (1 + int(spec.alpha)) ** spec.Q
    return math.ceil(spec.c_Q)


def sample(spec: ModelSpec, n: int, seed: int, include_root: bool = False) -> CountTable:
    """Draw ``n`` observations by ancestral sampling over the star graph.

    The root is a fair coin; each leaf then copies it with chance
    ``(1 + rho) / 2``. Draws come from a Philox counter-based generator keyed
    by ``seed``, so identical arguments give identical tables.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"sample size must be a positive integer, got {n!r}")
    if int(seed) != seed or not 0 <= seed <= UINT64_MAX:
        raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    Q = spec.Q
    flip = (1.0 - spec.rho) / 2.0
    shifts = np.arange(Q)
    counts = np.zeros(1 << (Q + 1), dtype=np.int64)
    remaining = int(n)
    while remaining:
        m = min(remaining, _SAMPLE_CHUNK)
        root = rng.integers(0, 2, size=m)
        leaves = root[:, None] ^ (rng.random((m, Q)) < flip)
        t = (leaves << shifts).sum(axis=1) | (root << Q)
        counts += np.bincount(t, minlength=counts.size)
        remaining -= m
    table = CountTable(Q, True, counts)
    return table if include_root else table.leaves_only()
