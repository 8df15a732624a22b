"""Two-by-two dependence measures, correlation matrices and role reversal."""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Mapping, Optional

import numpy as np

from .errors import DomainError, UndefinedMeasureError
from .model import ModelSpec, ProbVector, alpha_to_rho


@dataclass(frozen=True)
class TwoByTwo:
    """A 2x2 table of a response (rows: miss/succeed) against an explanatory
    variable (columns: weak/strong).

    Field order is the cell index order with the response on bit 0, so
    ``TwoByTwo(*v)`` accepts ``v = (n00, n10, n01, n11)`` directly. Entries
    may be probabilities or counts.
    """

    p_mw: float
    p_sw: float
    p_ms: float
    p_ss: float
    row: str = "A"
    col: str = "L"

    def __post_init__(self):
        cells = self.cells()
        if not np.all(np.isfinite(cells)) or np.any(cells < 0):
            raise DomainError(f"2x2 entries must be finite and nonnegative, got {cells}")

    def cells(self) -> np.ndarray:
        return np.array([self.p_mw, self.p_sw, self.p_ms, self.p_ss], dtype=float)

    @property
    def total(self) -> float:
        return float(self.cells().sum())

    def normalized(self) -> "TwoByTwo":
        total = self.total
        if total <= 0:
            raise DomainError("cannot normalize an empty 2x2 table")
        return TwoByTwo(*(self.cells() / total), row=self.row, col=self.col)


@dataclass(frozen=True)
class MeasureSet:
    """The seven standard 2x2 measures.

    A measure whose denominator vanishes is ``None`` and its name is listed
    in ``undefined``.
    """

    odds_given_strong: Optional[float]
    odds_given_weak: Optional[float]
    odds_ratio: Optional[float]
    chance_given_strong: Optional[float]
    chance_given_weak: Optional[float]
    chance_difference: Optional[float]
    relative_chance: Optional[float]
    undefined: tuple = ()

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "undefined"}


def _ratio(num, den):
    if num is None or den is None or den == 0:
        return None
    return num / den


def measures(t: TwoByTwo, strict: bool = True) -> MeasureSet:
    """Odds, odds-ratio, conditional chances, chance difference and relative chance.

    With ``strict`` an undefined measure raises :class:`UndefinedMeasureError`
    naming it; otherwise it is reported as ``None``.
    """
    mw, sw, ms, ss = (float(c) for c in t.cells())
    chance_strong = _ratio(ss, ss + ms)
    chance_weak = _ratio(sw, sw + mw)
    values = {
        "odds_given_strong": _ratio(ss, ms),
        "odds_given_weak": _ratio(sw, mw),
        "odds_ratio": _ratio(ss * mw, ms * sw),
        "chance_given_strong": chance_strong,
        "chance_given_weak": chance_weak,
        "chance_difference": (
            None if chance_strong is None or chance_weak is None else chance_strong - chance_weak
        ),
        "relative_chance": _ratio(chance_strong, chance_weak),
    }
    undefined = tuple(k for k, v in values.items() if v is None)
    if strict and undefined:
        raise UndefinedMeasureError(undefined[0], f"a margin or cell of the {t.row}-by-{t.col} table is zero")
    return MeasureSet(**values, undefined=undefined)


def csd(t) -> float:
    """Cross-sum difference ``((n00 + n11) - (n01 + n10)) / n``.

    ``t`` is a :class:`TwoByTwo` or four cells in index order.
    """
    cells = t.cells() if isinstance(t, TwoByTwo) else np.asarray(t, dtype=float)
    n = cells.sum()
    if n <= 0:
        raise DomainError("cross-sum difference of an empty table")
    return float(((cells[0] + cells[3]) - (cells[1] + cells[2])) / n)


def correlation_matrix(spec: ModelSpec) -> np.ndarray:
    """Correlations of the effect-coded variables, root last: ``rho**2`` between leaves, ``rho`` to the root."""
    return correlation_matrix_general([spec.rho] * spec.Q)


def correlation_matrix_general(rhos) -> np.ndarray:
    """Latent-class form with leaf-specific dependences: ``rho_q rho_r`` between leaves, ``rho_q`` to the root."""
    r = np.asarray(rhos, dtype=float)
    if r.ndim != 1 or r.size < 1:
        raise DomainError("need at least one leaf correlation")
    if np.any(r < 0) or np.any(r >= 1):
        raise DomainError(f"leaf correlations must lie in [0, 1), got {r}")
    full = np.append(r, 1.0)
    out = np.outer(full, full)
    np.fill_diagonal(out, 1.0)
    return out


def _position(index: int, p: int) -> int:
    pos = index + p if index < 0 else index
    if not 0 <= pos < p:
        raise DomainError(f"variable index {index} out of range for {p} variables")
    return pos


def _name(pos: int, pi: ProbVector) -> str:
    if pi.root_included and pos == pi.p - 1:
        return "L"
    return f"A{pos + 1}"


def conditional_pair_table(pi: ProbVector, pair, given: Mapping[int, int] = None) -> TwoByTwo:
    """Conditional 2x2 slice of ``pi`` for ``pair = (response, explanatory)``.

    Variables are bit positions (``-1`` is the last variable, the root when
    included). ``given`` fixes levels of other variables; any variable not
    named is summed out. The slice is renormalized to sum to one.
    """
    p = pi.p
    response, explanatory = (_position(i, p) for i in pair)
    if response == explanatory:
        raise DomainError("pair must name two distinct variables")
    fixed = {}
    for var, level in (given or {}).items():
        pos = _position(var, p)
        if pos in (response, explanatory):
            raise DomainError(f"variable {var} is both in the pair and conditioned on")
        if level not in (0, 1):
            raise DomainError(f"level must be 0 or 1, got {level!r}")
        fixed[pos] = level
    t = np.arange(1 << p)
    keep = np.ones(t.size, dtype=bool)
    for pos, level in fixed.items():
        keep &= ((t >> pos) & 1) == level
    cell = ((t >> response) & 1) | (((t >> explanatory) & 1) << 1)
    table = np.bincount(cell[keep], weights=pi.entries[keep], minlength=4)
    total = table.sum()
    if total <= 0:
        raise DomainError(f"conditioning event {fixed} has probability zero")
    return TwoByTwo(*(table / total), row=_name(response, pi), col=_name(explanatory, pi))


@dataclass(frozen=True)
class ReversalReport:
    """Dependence of a leaf on the root versus the root on that leaf, given another leaf.

    Forward values describe ``A2`` responding to ``L``; reversed values
    describe ``L`` responding to ``A2`` within each level of ``A1``.
    """

    alpha: float
    rho: float
    Q: int
    forward_odds_ratio: float
    forward_chance_difference: float
    forward_relative_chance: float
    odds_ratio_given_miss: float
    odds_ratio_given_success: float
    relative_chance_given_miss: float
    relative_chance_given_success: float
    chance_difference_given_miss: float
    chance_difference_given_success: float
    extreme_relative_chance: float
    single_leaf_relative_chance: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def reversal_analysis(alpha: float, Q: int = 2) -> ReversalReport:
    """Closed-form measures before and after exchanging the roles of ``L`` and ``A2``.

    ``extreme_relative_chance`` is ``(1 + alpha**Q) / 2``: the chance of a
    strong root at an even split of the leaves (exactly 1/2) over its chance
    when every leaf misses. ``single_leaf_relative_chance`` flips just one
    leaf from miss to success with all other leaves missing,
    ``(1 + alpha**Q) / (1 + alpha**(Q-2))``; both coincide at ``Q = 2``.
    """
    rho = alpha_to_rho(alpha)
    if int(Q) != Q or Q < 2:
        raise DomainError(f"reversal needs at least two leaves, got Q={Q!r}")
    a2 = alpha * alpha
    return ReversalReport(
        alpha=float(alpha),
        rho=rho,
        Q=int(Q),
        forward_odds_ratio=a2,
        forward_chance_difference=rho,
        forward_relative_chance=float(alpha),
        odds_ratio_given_miss=a2,
        odds_ratio_given_success=a2,
        relative_chance_given_miss=(1.0 + a2) / 2.0,
        relative_chance_given_success=2.0 * a2 / (1.0 + a2),
        chance_difference_given_miss=0.5 - 1.0 / (1.0 + a2),
        chance_difference_given_success=a2 / (1.0 + a2) - 0.5,
        extreme_relative_chance=(1.0 + alpha ** Q) / 2.0,
        single_leaf_relative_chance=(1.0 + alpha ** Q) / (1.0 + alpha ** (Q - 2)),
    )
