"""
Transflex - Finite-Difference Gradient Check
============================================
Compares tape gradients against central differences, coordinate by coordinate.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .params import ParamStore
from .tape import Node, Tape

logger = logging.getLogger(__name__)

Objective = Callable[[Tape, ParamStore], Node]

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
ERROR_FLOOR = 1e-8


@dataclass
class ParamCheck:
    """Worst coordinate of one parameter tensor."""
    name: str
    max_rel_error: float
    worst_index: Tuple[int, ...]
    analytic: float
    numeric: float

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "max_rel_error": self.max_rel_error,
            "worst_index": list(self.worst_index),
            "analytic": self.analytic,
            "numeric": self.numeric,
        }


@dataclass
class GradCheckReport:
    """Per-parameter maxima plus the overall verdict against ``tolerance``."""
    tolerance: float
    checks: List[ParamCheck] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max((c.max_rel_error for c in self.checks), default=0.0)

    @property
    def worst(self) -> Optional[ParamCheck]:
        return max(self.checks, key=lambda c: c.max_rel_error, default=None)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def failures(self) -> List[ParamCheck]:
        return [c for c in self.checks if c.max_rel_error >= self.tolerance]

    def summary(self) -> str:
        lines = [f"{'parameter':<24} {'max rel err':>12}  worst coordinate"]
        for c in self.checks:
            flag = "  FAIL" if c.max_rel_error >= self.tolerance else ""
            lines.append(f"{c.name:<24} {c.max_rel_error:>12.3e}  {c.worst_index}{flag}")
        lines.append(f"overall max {self.max_error:.3e} (tolerance {self.tolerance:.0e})")
        return "\n".join(lines)


def relative_error(analytic: float, numeric: float, floor: float = ERROR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def analytic_gradients(store: ParamStore, objective: Objective) -> Dict[str, np.ndarray]:
    tape = Tape()
    loss = objective(tape, store)
    tape.backward(loss)
    store.zero_grad()
    store.collect_grads(tape)
    return {name: g.copy() for name, g in store.grads.items()}


def _evaluate(store: ParamStore, objective: Objective) -> float:
    return float(objective(Tape(enabled=False), store).value)


def grad_check(
    store: ParamStore,
    objective: Objective,
    tolerance: float = DEFAULT_TOLERANCE,
    step: float = DEFAULT_STEP,
    analytic: Optional[Dict[str, np.ndarray]] = None,
    names: Optional[List[str]] = None,
    floor: float = ERROR_FLOOR,
) -> GradCheckReport:
    """
    Check every coordinate of every parameter (or of ``names``).

    Args:
        store: Parameters, perturbed in place and restored
        objective: Builds the scalar loss on a tape from ``store``
        tolerance: Relative-error threshold for ``report.passed``
        step: Central-difference step h
        analytic: Gradients to test instead of the tape's own (harness checks)
        names: Restrict to these parameters
        floor: Smallest denominator of the relative error

    Returns:
        GradCheckReport; never raises on mismatch
    """
    if analytic is None:
        analytic = analytic_gradients(store, objective)

    report = GradCheckReport(tolerance=tolerance)
    for name in names or store.names():
        x = store.params[name]
        worst = ParamCheck(name, 0.0, (), 0.0, 0.0)
        for index in np.ndindex(*x.shape):
            original = x[index]
            x[index] = original + step
            plus = _evaluate(store, objective)
            x[index] = original - step
            minus = _evaluate(store, objective)
            x[index] = original
            numeric = (plus - minus) / (2.0 * step)
            a = float(analytic[name][index])
            err = relative_error(a, numeric, floor)
            if err > worst.max_rel_error or not worst.worst_index:
                worst = ParamCheck(name, err, tuple(int(i) for i in index), a, numeric)
        report.checks.append(worst)

    logger.info(f"Gradient check over {len(report.checks)} parameters: max rel err {report.max_error:.3e}")
    return report
