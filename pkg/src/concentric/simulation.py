"""Repeated sample-and-fit experiments for checking EM accuracy and speed.

Every replicate draws its own seed from ``(master_seed, cell, replicate)``,
so results do not depend on the order in which replicates run.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .estimation import EMConfig, em_fit
from .model import ModelSpec, sample

QUANTILES = (0.5, 0.9, 0.95, 0.99, 1.0)
DEFAULT_RHOS = (0.5, 0.6, 0.7, 0.8)


def replicate_seed(master_seed: int, cell: int, replicate: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(cell, replicate))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass
class Replicate:
    seed: int
    rho_hat: float
    iterations: dict
    monotone: bool
    flags: tuple


@dataclass
class Cell:
    index: int
    rho: float
    n: int
    replicates: list = field(default_factory=list)

    def iteration_counts(self, tolerance) -> np.ndarray:
        return np.array([r.iterations[tolerance] for r in self.replicates])

    def abs_errors(self) -> np.ndarray:
        return np.array([abs(r.rho_hat - self.rho) for r in self.replicates])

    def summary(self, tolerances) -> dict:
        errors = self.abs_errors()
        flags = {}
        for r in self.replicates:
            for f in r.flags:
                flags[f] = flags.get(f, 0) + 1
        return {
            "rho": self.rho,
            "n": self.n,
            "replicates": len(self.replicates),
            "iterations": {
                repr(tol): _quantiles(self.iteration_counts(tol)) for tol in tolerances
            },
            "abs_error": _quantiles(errors),
            "monotonicity_violations": sum(not r.monotone for r in self.replicates),
            "flag_counts": dict(sorted(flags.items())),
        }


def _quantiles(values: np.ndarray) -> dict:
    qs = np.quantile(values, QUANTILES)
    return {f"q{int(round(q * 100))}": float(v) for q, v in zip(QUANTILES, qs)}


@dataclass
class SimulationReport:
    Q: int
    tolerances: tuple
    master_seed: int
    cells: list

    def to_dict(self, include_replicates: bool = False) -> dict:
        cells = []
        for cell in self.cells:
            entry = cell.summary(self.tolerances)
            if include_replicates:
                entry["per_replicate"] = [
                    {
                        "seed": r.seed,
                        "rho_hat": r.rho_hat,
                        "iterations": {repr(t): r.iterations[t] for t in self.tolerances},
                        "flags": list(r.flags),
                    }
                    for r in cell.replicates
                ]
            cells.append(entry)
        return {
            "model": {"Q": self.Q},
            "settings": {
                "tolerances": list(self.tolerances),
                "master_seed": self.master_seed,
            },
            "cells": cells,
            "flags": sorted({f for cell in cells for f in cell["flag_counts"]}),
        }


def _run_replicate(task) -> Replicate:
    Q, rho, n, seed, tolerances, max_iterations = task
    counts = sample(ModelSpec.from_rho(Q, rho), n, seed)
    iterations = {}
    flags = set()
    monotone = True
    rho_hat = None
    # the tightest tolerance supplies the reported estimate
    for tol in sorted(tolerances, reverse=True):
        trace = em_fit(counts, EMConfig(tolerance=tol, max_iterations=max_iterations))
        iterations[tol] = trace.n_iterations
        monotone &= trace.is_monotone()
        flags.update(trace.flags)
        rho_hat = trace.final_rho
    return Replicate(seed, rho_hat, iterations, monotone, tuple(sorted(flags)))


def run_simulation(
    Q: int = 4,
    rhos=DEFAULT_RHOS,
    ns=(300, 1000),
    replicates: int = 500,
    tolerances=(1e-4, 1e-7),
    master_seed: int = 0,
    threads: int = 1,
    max_iterations: int = 2000,
) -> SimulationReport:
    """Sample and fit ``replicates`` tables for every ``(rho, n)`` cell."""
    if replicates < 1:
        raise DomainError(f"replicates must be at least 1, got {replicates!r}")
    if threads < 1:
        raise DomainError(f"threads must be at least 1, got {threads!r}")
    if not rhos or not ns or not tolerances:
        raise DomainError("rho, n and tolerance grids must be nonempty")
    tolerances = tuple(float(t) for t in tolerances)
    cells = []
    tasks = []
    for index, (rho, n) in enumerate((r, m) for r in rhos for m in ns):
        cells.append(Cell(index, float(rho), int(n)))
        for rep in range(replicates):
            seed = replicate_seed(master_seed, index, rep)
            tasks.append((Q, float(rho), int(n), seed, tolerances, max_iterations))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_replicate, tasks))
    else:
        results = [_run_replicate(t) for t in tasks]
    for i, result in enumerate(results):
        cells[i // replicates].replicates.append(result)
    return SimulationReport(Q, tolerances, master_seed, cells)
