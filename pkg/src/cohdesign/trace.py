"""Per-iteration bookkeeping for the iterative solvers."""

from dataclasses import asdict, dataclass, field, fields
import math

import numpy as np


@dataclass(frozen=True)
class TraceRecord:
    """One completed solver iteration.

    ``objective_before`` and ``objective`` are the smoothed objective
    (``f_rho`` for DMCM, ``F`` for DMCM-P) at the iterate the step started
    from and at the iterate it produced, both under the same ``(rho, beta)``.
    ``f_exact`` and ``col_dev`` describe the produced iterate. Fields that do
    not apply to a solver are NaN.
    """

    round: int
    iteration: int
    rho: float
    beta: float
    objective_before: float
    objective: float
    f_rho: float
    f_exact: float
    col_dev: float
    step_M: float
    step_P: float = math.nan
    gap: float = math.nan
    descent_bound: float = math.nan


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    initial_f_exact: float = math.nan
    best_f_exact: float = math.inf
    best_index: int = -1
    best_M: np.ndarray = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def append(self, rec, M=None):
        self.records.append(rec)
        if rec.f_exact < self.best_f_exact:
            self.best_f_exact = rec.f_exact
            self.best_index = len(self.records) - 1
            if M is not None:
                self.best_M = M.copy()

    def extend(self, other):
        """Append ``other``'s records, renumbering nothing (rounds are set by the caller)."""
        offset = len(self.records)
        if math.isnan(self.initial_f_exact):
            self.initial_f_exact = other.initial_f_exact
        for rec in other.records:
            self.records.append(rec)
        if other.best_f_exact < self.best_f_exact:
            self.best_f_exact = other.best_f_exact
            self.best_index = offset + other.best_index
            self.best_M = other.best_M

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def round_records(self, r):
        return [rec for rec in self.records if rec.round == r]

    @property
    def n_rounds(self):
        return len({rec.round for rec in self.records})

    def as_dicts(self):
        return [asdict(r) for r in self.records]

    @staticmethod
    def field_names():
        return [f.name for f in fields(TraceRecord)]
