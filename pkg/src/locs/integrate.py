"""Adaptive Dormand-Prince 5(4) integration of controlled systems.

The control input is evaluated in closed form at every stage time and the
running energy ``int u^T u`` is integrated as an extra state, so states and
energy share one error-controlled grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Optional, Union

import numpy as np

from .dynamics import NonlinearSystem
from .linsys import ControlLaw, InvalidHorizonError, LinearModel

if TYPE_CHECKING:
    from .planner import Plan

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12
MIN_SAMPLES = 200

# Butcher tableau (Dormand & Prince 1980); the 5th-order row is also stage 7.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# Continuous extension, 4th order: y(t + s h) = y + h K^T (P @ [s, s^2, s^3, s^4]).
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER = 5


class StepSizeUnderflowError(RuntimeError):
    """The adaptive step collapsed below floating-point resolution."""

    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t={t!r} (h={h:.3e}); problem may be stiff")
        self.t = t
        self.h = h


@dataclass
class OdeSolution:
    t: np.ndarray
    y: np.ndarray
    n_steps: int
    n_rejected: int
    n_fev: int


def _rms(v: np.ndarray) -> float:
    return float(np.sqrt(np.mean(v * v)))


def _initial_step(fun, t0, y0, f0, direction_span, rtol, atol) -> float:
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / _ORDER)
    return min(100 * h0, h1, direction_span)


def dopri5(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    tf: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    t_eval: Optional[np.ndarray] = None,
    max_step: float = np.inf,
) -> OdeSolution:
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``tf > t0``.

    Output is reported at ``t_eval`` (sorted, inside [t0, tf]) through the
    dense interpolant, or at every accepted step when ``t_eval`` is None.
    The final point is always the step endpoint at ``tf``, not interpolated.
    """
    if not tf > t0:
        raise InvalidHorizonError(f"integration needs tf > t0, got t0={t0}, tf={tf}")
    y = np.asarray(y0, dtype=float).copy()
    t = float(t0)
    span = float(tf) - t
    n_fev = 0

    def f(tt, yy):
        nonlocal n_fev
        n_fev += 1
        return np.asarray(fun(tt, yy), dtype=float)

    k1 = f(t, y)
    h = min(_initial_step(f, t, y, k1, span, rtol, atol), max_step)
    K = np.empty((7, y.shape[0]))

    ts, ys = [t], [y.copy()]
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        ev = int(np.searchsorted(t_eval, t, side="right"))
    n_steps = n_rejected = 0
    while t < tf:
        h = min(h, max_step)
        if t + h >= tf or (tf - (t + h)) < 1e-12 * abs(tf):
            h = tf - t
        if h <= 10 * np.spacing(abs(t)) or h <= 0:
            raise StepSizeUnderflowError(t, h)
        K[0] = k1
        for s in range(1, 7):
            K[s] = f(t + _C[s] * h, y + h * (np.asarray(_A[s]) @ K[:s]))
        y_new = y + h * (_B5[:6] @ K[:6])
        err_vec = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(err_vec / scale)
        if err <= 1.0:
            t_new = tf if h == tf - t else t + h
            if t_eval is not None:
                stop = int(np.searchsorted(t_eval, t_new, side="right"))
                if stop > ev:
                    sig = (t_eval[ev:stop] - t) / h
                    powers = np.cumprod(np.repeat(sig[:, None], 4, axis=1), axis=1)
                    Q = K.T @ _P
                    vals = y + h * (powers @ Q.T)
                    if t_eval[stop - 1] == t_new:
                        vals[-1] = y_new
                    for tt, v in zip(t_eval[ev:stop], vals):
                        ts.append(float(tt))
                        ys.append(v)
                    ev = stop
            else:
                ts.append(t_new)
                ys.append(y_new.copy())
            t, y = t_new, y_new
            k1 = K[6].copy()
            n_steps += 1
            factor = _MAX_FACTOR if err == 0 else min(_MAX_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
            h *= factor
        else:
            n_rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
    if ts[-1] != tf:
        ts.append(float(tf))
        ys.append(y.copy())
    else:
        ys[-1] = y.copy()
    return OdeSolution(np.array(ts), np.array(ys), n_steps, n_rejected, n_fev)


@dataclass
class Trajectory:
    """Sampled path: states, inputs and running energy at increasing times."""

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    energy: np.ndarray
    n_steps: int = 0
    handoffs: list = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def __len__(self) -> int:
        return self.times.shape[0]


SystemLike = Union[NonlinearSystem, LinearModel]


def _drift(system: SystemLike):
    if isinstance(system, LinearModel):
        return lambda x: system.A @ x + system.f
    return system.vector_field


def simulate(
    system: SystemLike,
    x0,
    law: Optional[ControlLaw],
    t0: float,
    tf: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_samples: int = MIN_SAMPLES,
) -> Trajectory:
    """Integrate ``x' = F(x) + B u(t)`` with ``law`` (None means u = 0)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    n = x0.shape[0]
    B = system.B
    drift = _drift(system)
    if law is None:
        u_of = lambda t: np.zeros(B.shape[1])
    else:
        u_of = law.u

    def rhs(t, y):
        u = u_of(t)
        out = np.empty(n + 1)
        out[:n] = drift(y[:n]) + B @ u
        out[n] = u @ u
        return out

    grid = np.linspace(t0, tf, max(n_samples, 2))
    sol = dopri5(rhs, t0, np.append(x0, 0.0), tf, rtol, atol, t_eval=grid)
    inputs = np.array([u_of(float(t)) for t in sol.t]).reshape(len(sol.t), B.shape[1])
    energy = np.maximum.accumulate(sol.y[:, n])
    return Trajectory(sol.t, sol.y[:, :n], inputs, energy, sol.n_steps)


def concatenate(pieces: list, x0=None, t0: float = 0.0) -> Trajectory:
    """Join contiguous segments, dropping duplicated hand-off samples."""
    if not pieces:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        return Trajectory(np.array([t0]), x0[None, :], np.zeros((1, 0)), np.zeros(1))
    times, states, inputs, energy, handoffs = [], [], [], [], []
    offset = 0.0
    for i, p in enumerate(pieces):
        sl = slice(0, None) if i == 0 else slice(1, None)
        times.append(p.times[sl])
        states.append(p.states[sl])
        inputs.append(p.inputs[sl])
        energy.append(p.energy[sl] + offset)
        offset += float(p.energy[-1])
        handoffs.append((p.final_time, p.final_state.copy()))
    return Trajectory(
        np.concatenate(times),
        np.vstack(states),
        np.vstack(inputs),
        np.concatenate(energy),
        sum(p.n_steps for p in pieces),
        handoffs,
    )


def simulate_plan(
    system: SystemLike,
    plan: "Plan",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    n_samples: int = MIN_SAMPLES,
) -> Trajectory:
    """Replay every segment law of ``plan`` on ``system``, open loop.

    Each segment starts from the arrival state of the previous one on
    ``system`` itself, not from the plan's recorded waypoints.
    """
    x = np.asarray(plan.x0, dtype=float)
    pieces = []
    for step in plan.steps:
        seg = simulate(system, x, step.law, step.t_start, step.t_end, rtol, atol, n_samples)
        pieces.append(seg)
        x = seg.final_state
    return concatenate(pieces, plan.x0, plan.t0)
