"""Count tables over leaf (and optionally root) level combinations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class CountTable:
    """Observed or imputed counts, indexed like :class:`~concentric.model.ProbVector`.

    Bit ``q`` of a cell index is the level of leaf ``q + 1``; when
    ``root_observed`` the extra most significant bit is the root. Counts may
    be real-valued (E-step pseudo-counts, probability tables used as
    pseudo-counts) but never negative.
    """

    Q: int
    root_observed: bool
    counts: np.ndarray

    def __post_init__(self):
        if self.Q < 1:
            raise DomainError(f"Q must be >= 1, got {self.Q}")
        counts = np.array(self.counts, dtype=float)
        width = self.Q + 1 if self.root_observed else self.Q
        if counts.shape != (1 << width,):
            raise DomainError(
                f"expected {1 << width} cells for Q={self.Q}, "
                f"root_observed={self.root_observed}; got shape {counts.shape}"
            )
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise DomainError("counts must be finite and nonnegative")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> float:
        return float(self.counts.sum())

    @property
    def width(self) -> int:
        return self.Q + 1 if self.root_observed else self.Q

    def leaves_only(self) -> "CountTable":
        """Drop the root by summing over its two levels."""
        if not self.root_observed:
            return self
        half = 1 << self.Q
        return CountTable(self.Q, False, self.counts[:half] + self.counts[half:])

    def pair_counts(self, i: int, j: int) -> np.ndarray:
        """Bivariate margin of variables at bit positions ``i`` and ``j``.

        Returned in index order ``(n00, n10, n01, n11)`` with ``i`` varying
        fastest.
        """
        width = self.width
        if not (0 <= i < width and 0 <= j < width) or i == j:
            raise DomainError(f"invalid variable pair ({i}, {j}) for {width} variables")
        t = np.arange(1 << width)
        cell = ((t >> i) & 1) | (((t >> j) & 1) << 1)
        return np.bincount(cell, weights=self.counts, minlength=4)

    def require_n(self):
        if self.n <= 0:
            raise DomainError("count table is empty (n = 0)")
