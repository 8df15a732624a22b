"""Kronecker-structured maps between probabilities and interaction parametrizations.

All maps act factor by factor on the bit positions of the cell index, so a
``2**p`` vector is transformed in ``O(p 2**p)`` operations without forming
any ``2**p x 2**p`` matrix. Entry ``I`` of an interaction vector refers to
the subset of variables whose bits are set in ``I`` (bit ``q`` is variable
``q + 1``), matching the cell indexing of :class:`~concentric.model.ProbVector`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InconsistencyError
from .model import ModelSpec, ProbVector, leaf_ones

# 2x2 base matrices; row/column order is level 0 then level 1
B = np.array([[1.0, 1.0], [0.0, 1.0]])
B_INV = np.array([[1.0, -1.0], [0.0, 1.0]])
E = np.array([[1.0, 1.0], [1.0, -1.0]])
E_INV = E / 2.0
T_SYM = np.array([[1.0, 1.0], [-0.5, 0.5]])
T_SYM_INV = np.linalg.inv(T_SYM)

KINDS = ("raw_moment", "central_moment", "loglinear", "linear")

for _m in (B, B_INV, E, E_INV, T_SYM, T_SYM_INV):
    _m.flags.writeable = False


def centering_matrix(prob_one: float) -> np.ndarray:
    """Central-moment factor ``[[1, 1], [-m, 1 - m]]`` for a variable with ``pr(level 1) = m``.

    Its second row maps ``(pi_0, pi_1)`` to ``E(A - m)``. At ``m = 1/2`` this
    is :data:`T_SYM`.
    """
    m = float(prob_one)
    return np.array([[1.0, 1.0], [-m, 1.0 - m]])


@dataclass(frozen=True)
class InteractionVector:
    """Moments or interactions indexed by variable subsets.

    ``means`` is only set for central moments computed with asymmetric
    margins; it is what the inverse map needs to undo the centering.
    """

    p: int
    kind: str
    entries: np.ndarray
    root_included: bool = True
    means: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown interaction kind {self.kind!r}")
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (1 << self.p,):
            raise DomainError(f"expected {1 << self.p} entries, got shape {entries.shape}")
        entries.flags.writeable = False
        object.__setattr__(self, "entries", entries)

    def labels(self) -> list[str]:
        return [subset_label(i, self.p, self.root_included) for i in range(1 << self.p)]

    def as_dict(self, drop_zeros: bool = False, atol: float = 0.0) -> dict:
        return {
            label: float(v)
            for label, v in zip(self.labels(), self.entries)
            if not (drop_zeros and abs(v) <= atol)
        }


def subset_label(index: int, p: int, root_included: bool = True) -> str:
    """Name of the subset encoded by ``index``: ``"-"`` for the empty set, else ``"1,3,L"``."""
    names = [str(q + 1) for q in range(p)]
    if root_included:
        names[-1] = "L"
    members = [names[q] for q in range(p) if index >> q & 1]
    return ",".join(members) if members else "-"


def _as_factors(base, p: int) -> list[np.ndarray]:
    base_arr = np.asarray(base, dtype=float)
    if base_arr.shape == (2, 2):
        return [base_arr] * p
    factors = [np.asarray(m, dtype=float) for m in base]
    if len(factors) != p or any(m.shape != (2, 2) for m in factors):
        raise DomainError(f"need one 2x2 matrix or {p} of them")
    return factors


def kron_apply(base, x) -> np.ndarray:
    """Apply a Kronecker product of 2x2 matrices to ``x`` of length ``2**p``.

    ``base`` is either one matrix used at every position or a sequence whose
    entry ``q`` acts on bit ``q`` of the index (variable ``q + 1``). In
    ``numpy.kron`` terms the operator is ``kron(M_p, ..., M_2, M_1)``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if x.ndim != 1 or n == 0 or n & (n - 1):
        raise DomainError(f"input length must be a power of two, got {x.shape}")
    p = n.bit_length() - 1
    factors = _as_factors(base, p)
    out = x.copy()
    for q, m in enumerate(factors):
        view = out.reshape(n >> (q + 1), 2, 1 << q)
        lo = view[:, 0, :].copy()
        hi = view[:, 1, :]
        view[:, 0, :] = m[0, 0] * lo + m[0, 1] * hi
        view[:, 1, :] = m[1, 0] * lo + m[1, 1] * hi
    return out


def _entries(pi) -> tuple[np.ndarray, int, bool]:
    if isinstance(pi, ProbVector):
        return pi.entries, pi.p, pi.root_included
    arr = np.asarray(pi, dtype=float)
    return arr, arr.size.bit_length() - 1, True


def variable_means(pi) -> np.ndarray:
    """``pr(variable q+1 = 1)`` for each variable of a probability vector."""
    x, p, _ = _entries(pi)
    t = np.arange(x.size)
    return np.array([x[(t >> q) & 1 == 1].sum() for q in range(p)])


def raw_moments(pi: ProbVector) -> InteractionVector:
    """``m = B_p pi``: entry ``I`` is the chance that every variable in ``I`` is at level 1."""
    x, p, root = _entries(pi)
    return InteractionVector(p, "raw_moment", kron_apply(B, x), root)


def _check_symmetric_means(means: np.ndarray, what: str):
    bad = np.flatnonzero(np.abs(means - 0.5) > 1e-12)
    if bad.size:
        raise DomainError(
            f"{what} needs symmetric variables; variable {bad[0] + 1} has mean {means[bad[0]]!r}"
        )


def central_moments(pi: ProbVector, allow_asymmetric: bool = False) -> InteractionVector:
    """Central moments of the 0/1-coded variables, ``mu = (T_1 x ... x T_p) pi``.

    By default every variable must have mean 1/2; ``allow_asymmetric``
    instead centres each variable at its own mean.
    """
    x, p, root = _entries(pi)
    means = variable_means(x)
    if allow_asymmetric:
        factors = [centering_matrix(m) for m in means]
        return InteractionVector(p, "central_moment", kron_apply(factors, x), root,
                                 tuple(float(m) for m in means))
    _check_symmetric_means(means, "central_moments")
    return InteractionVector(p, "central_moment", kron_apply(T_SYM, x), root)


def central_from_raw(m: InteractionVector, allow_asymmetric: bool = False) -> InteractionVector:
    """Central moments from raw moments via the factorwise product ``T B^-1``."""
    if m.kind != "raw_moment":
        raise DomainError(f"expected raw moments, got {m.kind}")
    means = np.array([m.entries[1 << q] for q in range(m.p)])
    if allow_asymmetric:
        factors = [centering_matrix(mq) @ B_INV for mq in means]
        return InteractionVector(m.p, "central_moment", kron_apply(factors, m.entries),
                                 m.root_included, tuple(float(v) for v in means))
    _check_symmetric_means(means, "central_from_raw")
    return InteractionVector(m.p, "central_moment", kron_apply(T_SYM @ B_INV, m.entries),
                             m.root_included)


def loglinear_interactions(pi: ProbVector) -> InteractionVector:
    """``lambda = (E^-1 x ... x E^-1) log pi``; every cell must be positive."""
    x, p, root = _entries(pi)
    if np.any(x <= 0):
        raise DomainError("log-linear interactions need strictly positive probabilities")
    return InteractionVector(p, "loglinear", kron_apply(E_INV, np.log(x)), root)


def linear_interactions(pi: ProbVector) -> InteractionVector:
    """``xi = E_p pi``.

    Entry ``I`` equals ``E(prod_{q in I} (1 - 2 A_q))``, i.e. the standardized
    moment of the -1/+1 coded variables up to the sign ``(-1)**|I|``; for
    jointly symmetric tables all odd-order entries vanish, so the sign never
    shows.
    """
    x, p, root = _entries(pi)
    return InteractionVector(p, "linear", kron_apply(E, x), root)


def leaf_linear_interactions(spec: ModelSpec) -> InteractionVector:
    """Linear interactions of the leaf margin: ``rho**|I|`` for even ``|I|``, else 0."""
    size = leaf_ones(spec.Q)
    entries = np.where(size % 2 == 0, spec.rho ** size.astype(float), 0.0)
    return InteractionVector(spec.Q, "linear", entries, root_included=False)


def leaf_loglinear(spec: ModelSpec) -> InteractionVector:
    """Log-linear interactions of the leaf margin, ``E_Q^-1 log(E_Q^-1 xi)``."""
    xi = leaf_linear_interactions(spec).entries
    pi = kron_apply(E_INV, xi)
    if np.any(pi <= 0):
        raise DomainError("leaf margin has a zero cell")
    return InteractionVector(spec.Q, "loglinear", kron_apply(E_INV, np.log(pi)),
                             root_included=False)


def leaf_margin_from_linear(spec: ModelSpec) -> ProbVector:
    """Leaf margin recovered from its linear interactions; equals :func:`marginal_leaves`."""
    return inverse_transform(leaf_linear_interactions(spec))


def inverse_transform(v: InteractionVector) -> ProbVector:
    """Recover the probability vector from any interaction vector."""
    if v.kind == "raw_moment":
        x = kron_apply(B_INV, v.entries)
    elif v.kind == "central_moment":
        if v.means is None:
            x = kron_apply(T_SYM_INV, v.entries)
        else:
            x = kron_apply([np.linalg.inv(centering_matrix(m)) for m in v.means], v.entries)
    elif v.kind == "linear":
        x = kron_apply(E_INV, v.entries)
    else:
        x = np.exp(kron_apply(E, v.entries))
        total = x.sum()
        if abs(total - 1.0) > 1e-8:
            raise InconsistencyError(f"log-linear terms give total probability {total!r}")
    # clip roundoff-level negatives from the linear inverses
    x = np.where((x < 0) & (x > -1e-12), 0.0, x)
    return ProbVector(v.p, x, v.root_included)


def transform(pi: ProbVector, kind: str) -> InteractionVector:
    """Dispatch to the forward map named by ``kind``."""
    forward = {
        "raw_moment": raw_moments,
        "central_moment": central_moments,
        "loglinear": loglinear_interactions,
        "linear": linear_interactions,
    }
    if kind not in forward:
        raise DomainError(f"unknown interaction kind {kind!r}")
    return forward[kind](pi)
