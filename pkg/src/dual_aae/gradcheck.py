"""Finite-difference gradient verification.

The checker is intentionally independent of the backward pass it validates:
it re-evaluates the forward function coordinate by coordinate with central
differences (f(x+h) - f(x-h)) / 2h and compares against the taped gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Tensor
from .errors import DimensionError, NumericError


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_input: int          # index into the checked tensor list
    worst_coord: tuple        # coordinate within that tensor
    n_coordinates: int
    passed: bool | None       # None when no tolerance was given

    def __str__(self):
        status = "" if self.passed is None else (" PASS" if self.passed else " FAIL")
        return (f"grad_check: max rel err {self.max_rel_err:.3e} at input "
                f"{self.worst_input} coord {self.worst_coord} "
                f"({self.n_coordinates} coordinates){status}")


def grad_check(f, points, h=1e-6, tol=None, denom_floor=1e-6) -> GradCheckReport:
    """Compare taped gradients of a scalar-valued `f` against central
    differences at `points` (a Tensor or a sequence of Tensors).

    Per-coordinate error is |analytic - numeric| / max(|analytic|, |numeric|,
    denom_floor); the floor keeps coordinates whose true gradient sits below
    finite-difference resolution from reporting meaningless ratios.

    Stochastic functions (dropout in train mode) are rejected: the
    re-evaluations would resample masks and the comparison would be invalid.
    """
    if isinstance(points, Tensor):
        points = [points]
    points = list(points)
    for p in points:
        p.requires_grad = True
        p.grad = None

    with Tape() as tape:
        loss = f(*points)
        if tape.stochastic:
            raise NumericError(
                "grad_check rejects stochastic functions "
                "(dropout in train mode); gradient-check with dropout off")
        if loss.data.size != 1:
            raise DimensionError("grad_check needs a scalar-valued function")
        tape.backward(loss)

    analytic = []
    for p in points:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        analytic.append(np.array(g))
        p.grad = None

    max_err = 0.0
    worst = (0, ())
    n_coords = 0
    for idx, p in enumerate(points):
        flat = p.data.reshape(-1)
        a_flat = analytic[idx].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            f_plus = f(*points).item()
            flat[j] = orig - h
            f_minus = f(*points).item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(a_flat[j]), abs(numeric), denom_floor)
            err = abs(a_flat[j] - numeric) / denom
            n_coords += 1
            if err > max_err:
                max_err = err
                worst = (idx, np.unravel_index(j, p.data.shape))

    passed = None if tol is None else bool(max_err < tol)
    return GradCheckReport(max_rel_err=max_err, worst_input=worst[0],
                           worst_coord=tuple(int(c) for c in worst[1]),
                           n_coordinates=n_coords, passed=passed)
