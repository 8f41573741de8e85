"""Explicit Runge-Kutta drivers shared by the exact and hierarchy solvers.

States are plain complex ndarrays (any shape); the right-hand side is a
callable rhs(t, y) -> ndarray of the same shape.  Two methods are provided:
classic fixed-step RK4 and the adaptive Dormand-Prince RK45 pair with PI
step-size control.  Both are deterministic: the same inputs produce the same
trajectory bit for bit (fixed-step mode) or the same step sequence (adaptive).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationFailure, InvalidArgument, SteadyStateFailure


@dataclass(frozen=True)
class StepControl:
    """Integration method and its knobs.

    method "rk4" uses fixed steps of size dt; "rk45" adapts the step to meet
    the mixed tolerance atol + rtol * |y|.  t_max bounds evolve_to_steady.
    """

    method: str = "rk4"
    dt: float = 1e-3
    rtol: float = 1e-8
    atol: float = 1e-10
    t_max: float = 200.0
    max_step: float = np.inf

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise InvalidArgument(f"unknown method {self.method!r}")
        if self.dt <= 0 or self.rtol <= 0 or self.atol <= 0:
            raise InvalidArgument("dt and tolerances must be positive")


@dataclass(frozen=True)
class SteadyCriterion:
    """Declare steady when every tracked observable changes by less than
    rel_tol (relative, with a small absolute floor) over a window of time."""

    window: float = 1.0
    rel_tol: float = 1e-8
    abs_floor: float = 1e-12


def _rk4_step(rhs, t, y, h):
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Dormand-Prince 5(4) coefficients.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


class _DormandPrince:
    """Adaptive RK45 with PI control and FSAL reuse."""

    def __init__(self, rhs, t, y, control: StepControl):
        self.rhs = rhs
        self.t = t
        self.y = y
        self.control = control
        self.k_last = rhs(t, y)
        self.h = self._initial_step()
        self.err_prev = 1.0

    def _error_norm(self, err, y_new):
        scale = self.control.atol + self.control.rtol * np.maximum(
            np.abs(self.y), np.abs(y_new)
        )
        return float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))

    def _initial_step(self):
        scale = self.control.atol + self.control.rtol * np.abs(self.y)
        d0 = np.sqrt(np.mean(np.abs(self.y / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(self.k_last / scale) ** 2))
        h = 1e-3 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        return min(h, self.control.max_step)

    def step(self, h_cap=np.inf):
        """Advance one accepted step, at most h_cap. Returns the new time."""
        rejected = 0
        while True:
            h = min(self.h, h_cap, self.control.max_step)
            if h < 1e-14:
                raise IntegrationFailure(f"step size underflow at t = {self.t:.6f}")
            ks = [self.k_last]
            for i in range(1, 7):
                yi = self.y + h * sum(a * k for a, k in zip(_DP_A[i], ks))
                ks.append(self.rhs(self.t + _DP_C[i] * h, yi))
            y5 = self.y + h * sum(b * k for b, k in zip(_DP_B5, ks) if b != 0.0)
            err = h * sum((b5 - b4) * k for b5, b4, k in zip(_DP_B5, _DP_B4, ks))
            if not np.all(np.isfinite(y5.view(float))):
                raise IntegrationFailure(f"non-finite state at t = {self.t + h:.6f}")
            enorm = self._error_norm(err, y5)
            if enorm <= 1.0:
                # PI controller (orders 5/4), clipped growth.
                factor = 0.9 * enorm**-0.14 * self.err_prev**0.08 if enorm > 0 else 5.0
                self.h = h * min(5.0, max(0.2, factor))
                self.err_prev = max(enorm, 1e-10)
                self.t += h
                self.y = y5
                self.k_last = ks[6]  # FSAL: stage 7 was evaluated at (t+h, y5)
                return self.t
            rejected += 1
            if rejected > 50:
                raise IntegrationFailure(f"50 rejected steps at t = {self.t:.6f}")
            self.h = h * max(0.2, 0.9 * enorm**-0.2)


def evolve(y0, rhs, control: StepControl, t_span, record_grid=None):
    """Integrate y' = rhs(t, y) over t_span = (t0, t1).

    Returns the final state, or (times, states) with states sampled exactly at
    record_grid (grid points must lie inside t_span; both methods step onto
    each grid point).
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise InvalidArgument("t_span must be increasing")
    y = np.array(y0, dtype=complex)
    grid = None
    if record_grid is not None:
        grid = np.asarray(record_grid, dtype=float)
        if grid.size and (grid[0] < t0 - 1e-12 or grid[-1] > t1 + 1e-12):
            raise InvalidArgument("record_grid must lie within t_span")
        samples = []

    if control.method == "rk4":
        t = t0
        next_idx = 0
        if grid is not None:
            while next_idx < grid.size and grid[next_idx] <= t + 1e-13:
                samples.append(y.copy())
                next_idx += 1
        while t < t1 - 1e-13:
            h = min(control.dt, t1 - t)
            if grid is not None and next_idx < grid.size:
                h = min(h, grid[next_idx] - t)
            y = _rk4_step(rhs, t, y, h)
            if not np.all(np.isfinite(y.view(float))):
                raise IntegrationFailure(f"non-finite state at t = {t + h:.6f}")
            t += h
            if grid is not None:
                while next_idx < grid.size and grid[next_idx] <= t + 1e-13:
                    samples.append(y.copy())
                    next_idx += 1
    else:
        stepper = _DormandPrince(rhs, t0, y, control)
        next_idx = 0
        if grid is not None:
            while next_idx < grid.size and grid[next_idx] <= t0 + 1e-13:
                samples.append(y.copy())
                next_idx += 1
        while stepper.t < t1 - 1e-13:
            target = t1
            if grid is not None and next_idx < grid.size:
                target = min(target, grid[next_idx])
            stepper.step(h_cap=target - stepper.t)
            if grid is not None:
                while next_idx < grid.size and grid[next_idx] <= stepper.t + 1e-13:
                    samples.append(stepper.y.copy())
                    next_idx += 1
        y = stepper.y

    if grid is not None:
        return grid, samples
    return y


def evolve_to_steady(y0, rhs, criterion: SteadyCriterion, control: StepControl,
                     observables=None):
    """Integrate until the tracked observables stop changing.

    observables(y) -> 1-d array of tracked quantities; defaults to the raw
    state vector.  Returns (y_steady, t_steady).  Raises SteadyStateFailure
    if the criterion is not met by control.t_max.
    """
    if observables is None:
        observables = lambda y: np.asarray(y).ravel()
    y = np.array(y0, dtype=complex)
    t = 0.0
    prev = np.asarray(observables(y)).copy()
    while t < control.t_max:
        t_next = min(t + criterion.window, control.t_max)
        y = evolve(y, rhs, control, (t, t_next))
        t = t_next
        cur = np.asarray(observables(y))
        denom = np.maximum(np.abs(cur), criterion.abs_floor)
        change = float(np.max(np.abs(cur - prev) / denom))
        if change < criterion.rel_tol:
            return y, t
        prev = cur.copy()
    raise SteadyStateFailure(
        f"no steady state by t = {control.t_max} (last window change {change:.3e})"
    )
