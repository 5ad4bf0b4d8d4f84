"""Locally optimal control strategy (LOCS): a daisy chain of local steering moves.

Each step linearizes the nominal model at the current state, builds energy
ellipsoids for a few horizons and energies, keeps those whose whole sweep
stays inside the valid linearization region, samples candidate endpoints on
their surfaces, and steers to the candidate of lowest fitness

    k_E * E + sum_i w_i * |x_i - goal_i|.

The resulting input is simulated on the true system and the arrival state
seeds the next linearization.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .dynamics import NonlinearSystem, TargetSet, ValidRegion
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, Trajectory, concatenate, simulate
from .linsys import (
    ControlLaw,
    EnergyEllipsoid,
    InvalidInputError,
    UncontrollableHorizonError,
    gramian,
    steer,
    unit_sphere_samples,
    zero_input_trajectory,
)

log = logging.getLogger(__name__)

REACHED = "reached"
MAX_STEPS = "max_steps"
STUCK = "stuck"


@dataclass(frozen=True)
class LocsConfig:
    """Planner settings.  ``goal`` defaults to the target's center."""

    target: Optional[TargetSet] = None
    k_E: float = 4.0
    w: Optional[tuple] = None
    Q: int = 40
    epsilon: float = 0.1
    E_max: float = 10.0
    dt_candidates: tuple = (0.05, 0.1, 0.2)
    n_energies: int = 3
    max_steps: int = 200
    rng_seed: int = 0
    shrink: float = 0.9
    n_probe: int = 256
    n_intermediate: int = 5
    goal: Optional[tuple] = None
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if self.Q < 1:
            raise InvalidInputError("Q must be at least 1")
        if not self.dt_candidates or any(dt <= 0 for dt in self.dt_candidates):
            raise InvalidInputError("dt_candidates must be positive")
        if self.max_steps < 0:
            raise InvalidInputError("max_steps must be nonnegative")
        if self.k_E < 0 or (self.w is not None and any(wi < 0 for wi in self.w)):
            raise InvalidInputError("fitness weights must be nonnegative")
        if not (0 < self.shrink <= 1):
            raise InvalidInputError("shrink must lie in (0, 1]")
        if not (self.epsilon > 0 and self.E_max > 0):
            raise InvalidInputError("epsilon and E_max must be positive")
        if self.n_energies < 1 or self.n_probe < 1 or self.n_intermediate < 1:
            raise InvalidInputError("n_energies, n_probe and n_intermediate must be at least 1")
        object.__setattr__(self, "dt_candidates", tuple(float(d) for d in self.dt_candidates))
        if self.w is not None:
            object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        if self.goal is not None:
            object.__setattr__(self, "goal", tuple(float(v) for v in self.goal))

    def goal_point(self) -> np.ndarray:
        if self.goal is not None:
            return np.asarray(self.goal)
        if self.target is None:
            raise InvalidInputError("config has neither a goal nor a target")
        return self.target.anchor

    def weights(self, n: int) -> np.ndarray:
        if self.w is None:
            return np.ones(n)
        if len(self.w) != n:
            raise InvalidInputError(f"{len(self.w)} fitness weights for {n} states")
        return np.asarray(self.w)

    def energy_grid(self, E_max: Optional[float] = None) -> np.ndarray:
        E_max = self.E_max if E_max is None else E_max
        if self.n_energies == 1:
            return np.array([E_max])
        return np.geomspace(0.01 * E_max, E_max, self.n_energies)


def fitness(x, E: float, xf, cfg: LocsConfig) -> float:
    x, xf = np.asarray(x, dtype=float), np.asarray(xf, dtype=float)
    return float(cfg.k_E * E + cfg.weights(x.shape[0]) @ np.abs(x - xf))


@dataclass
class Candidate:
    x: np.ndarray
    dt: float
    t: float
    energy: float
    fitness: float
    feasible: bool
    residual: float
    index: int


@dataclass
class PlanStep:
    index: int
    t_start: float
    t_end: float
    x_start: np.ndarray
    x_planned: np.ndarray
    x_simulated: np.ndarray
    energy: float
    fitness: float
    law: ControlLaw
    trajectory: Trajectory
    n_candidates: int
    worst_residual: float
    E_max_used: float
    candidates: List[Candidate] = field(default_factory=list, repr=False)
    chosen_index: int = -1


@dataclass
class Plan:
    x0: np.ndarray
    t0: float
    steps: List[PlanStep]
    status: str

    @property
    def waypoints(self) -> list:
        """(t_p, planned x_p, simulated x_p) for p = 0..P."""
        pts = [(self.t0, self.x0, self.x0)]
        pts += [(s.t_end, s.x_planned, s.x_simulated) for s in self.steps]
        return pts

    @property
    def final_state(self) -> np.ndarray:
        return self.steps[-1].x_simulated if self.steps else self.x0

    @property
    def final_time(self) -> float:
        return self.steps[-1].t_end if self.steps else self.t0

    @property
    def total_energy(self) -> float:
        return float(sum(s.energy for s in self.steps))

    def trajectory(self) -> Trajectory:
        return concatenate([s.trajectory for s in self.steps], self.x0, self.t0)


@dataclass
class StepResult:
    status: str
    step: Optional[PlanStep] = None


def _cell_probe_residual(region, centers, shapes, unit_probe, E) -> float:
    worst = 0.0
    for c, shp in zip(centers, shapes):
        ell = EnergyEllipsoid(c, shp, E)
        pts = np.vstack([c[None, :], ell.from_unit(unit_probe)])
        worst = max(worst, float(np.max(region.residual(pts))))
    return worst


def generate_candidates(
    region: ValidRegion,
    x_cur,
    t_cur: float,
    cfg: LocsConfig,
    step_index: int = 0,
    E_max: Optional[float] = None,
) -> List[Candidate]:
    """Up to ``cfg.Q`` feasible endpoints, ordered by candidate index.

    A (horizon, energy) cell is feasible when the ellipsoids at
    ``n_intermediate`` evenly spaced times of the horizon, all taken at the
    cell energy, pass the region probe at ``shrink * epsilon``.  Because every
    intermediate state of a steering move lies on an ellipsoid of smaller or
    equal energy with the same center, this covers the whole move at the probe
    times.  Samples are spread round-robin over the feasible cells.
    """
    model = region.base
    x_cur = np.asarray(x_cur, dtype=float)
    n = x_cur.shape[0]
    eps = cfg.epsilon * cfg.shrink
    goal = cfg.goal_point()
    energies = cfg.energy_grid(E_max)
    probe_seed, sample_seed = np.random.SeedSequence([cfg.rng_seed, step_index]).spawn(2)

    half = (cfg.n_probe + 1) // 2
    dirs = unit_sphere_samples(n, cfg.n_probe, probe_seed)
    radii = np.ones(cfg.n_probe)
    radii[half:] = np.random.default_rng(probe_seed.spawn(1)[0]).random(cfg.n_probe - half) ** (1.0 / n)
    unit_probe = dirs * radii[:, None]

    cells = []
    for dt in cfg.dt_candidates:
        taus = dt * np.arange(1, cfg.n_intermediate + 1) / cfg.n_intermediate
        shapes = [gramian(model, t_cur, t_cur + tau) for tau in taus]
        if shapes[-1].condition_ratio < 1e-10:
            continue
        centers = [zero_input_trajectory(model, x_cur, t_cur, t_cur + tau) for tau in taus]
        for E in energies:
            worst = _cell_probe_residual(region, centers, shapes, unit_probe, E)
            if worst > eps:
                break  # ellipsoids are nested in E
            cells.append((dt, float(E), worst, shapes[-1], centers[-1]))
    if not cells:
        return []

    counts = [cfg.Q // len(cells) + (j < cfg.Q % len(cells)) for j in range(len(cells))]
    seeds = sample_seed.spawn(len(cells))
    out: List[Candidate] = []
    for (dt, E, worst, shape, center), count, seed in zip(cells, counts, seeds):
        if count == 0:
            continue
        ell = EnergyEllipsoid(center, shape, E)
        pts = ell.from_unit(unit_sphere_samples(n, count, seed))
        res = region.residual(pts)
        for x, r in zip(pts, res):
            if r > eps:
                continue
            energy = float(shape.inverse_quadratic(x - center))
            out.append(
                Candidate(
                    x=x,
                    dt=dt,
                    t=t_cur + dt,
                    energy=energy,
                    fitness=fitness(x, energy, goal, cfg),
                    feasible=True,
                    residual=max(worst, float(r)),
                    index=len(out),
                )
            )
    return out


def locs_step(
    system: NonlinearSystem,
    x_cur,
    t_cur: float,
    cfg: LocsConfig,
    true_system: Optional[NonlinearSystem] = None,
    step_index: int = 0,
) -> StepResult:
    """One linearize / select / steer / simulate cycle.

    ``system`` is the model that is linearized; ``true_system`` (default:
    the same) is the one that is integrated to get the arrival state.
    """
    x_cur = np.asarray(x_cur, dtype=float)
    if cfg.target is not None and cfg.target.contains(x_cur):
        return StepResult(REACHED)
    region = ValidRegion.at(system, x_cur, cfg.epsilon, t_cur)
    E_max = cfg.E_max
    cands = generate_candidates(region, x_cur, t_cur, cfg, step_index, E_max)
    if not cands:
        E_max = 0.5 * cfg.E_max
        log.info("step %d: no feasible candidate, retrying with E_max=%g", step_index, E_max)
        cands = generate_candidates(region, x_cur, t_cur, cfg, step_index, E_max)
    if not cands:
        return StepResult(STUCK)

    order = sorted(range(len(cands)), key=lambda k: (cands[k].fitness, cands[k].energy, k))
    plant = system if true_system is None else true_system
    for k in order:
        c = cands[k]
        try:
            law = steer(region.base, x_cur, t_cur, c.x, c.t)
        except UncontrollableHorizonError as exc:
            log.warning("step %d: candidate %d discarded: %s", step_index, k, exc)
            continue
        traj = simulate(plant, x_cur, law, t_cur, c.t, cfg.rtol, cfg.atol)
        step = PlanStep(
            index=step_index,
            t_start=t_cur,
            t_end=c.t,
            x_start=x_cur,
            x_planned=c.x,
            x_simulated=traj.final_state.copy(),
            energy=law.energy,
            fitness=c.fitness,
            law=law,
            trajectory=traj,
            n_candidates=len(cands),
            worst_residual=c.residual,
            E_max_used=E_max,
            candidates=cands,
            chosen_index=k,
        )
        return StepResult("moved", step)
    return StepResult(STUCK)


def locs_run(
    system: NonlinearSystem,
    x0,
    t0: float,
    cfg: LocsConfig,
    model_override: Optional[NonlinearSystem] = None,
) -> Plan:
    """Chain LOCS steps from ``x0`` until the target, ``max_steps`` or stuck.

    ``model_override`` is the true plant used for simulation while ``system``
    stays the nominal model that is linearized.
    """
    if cfg.target is None:
        raise InvalidInputError("locs_run needs a target set")
    x = np.asarray(x0, dtype=float).reshape(-1)
    t = float(t0)
    plan = Plan(x.copy(), t, [], MAX_STEPS)
    for p in range(cfg.max_steps):
        res = locs_step(system, x, t, cfg, model_override, p)
        if res.status in (REACHED, STUCK):
            plan.status = res.status
            return plan
        plan.steps.append(res.step)
        x, t = res.step.x_simulated, res.step.t_end
        log.debug("step %d -> t=%.4f x=%s", p, t, x)
    plan.status = REACHED if cfg.target.contains(x) else MAX_STEPS
    return plan


def plan_to_dict(plan: Plan, include_trajectories: bool = True) -> dict:
    steps = []
    for s in plan.steps:
        d = {
            "step": s.index,
            "t_start": s.t_start,
            "t_end": s.t_end,
            "x_start": s.x_start.tolist(),
            "x_planned": s.x_planned.tolist(),
            "x_simulated": s.x_simulated.tolist(),
            "energy": s.energy,
            "fitness": s.fitness,
            "n_candidates": s.n_candidates,
            "worst_residual": s.worst_residual,
            "E_max_used": s.E_max_used,
            "law": s.law.to_dict(),
        }
        if include_trajectories:
            tr = s.trajectory
            d["trajectory"] = {
                "t": tr.times.tolist(),
                "x": tr.states.tolist(),
                "u": tr.inputs.tolist(),
                "E": tr.energy.tolist(),
            }
        steps.append(d)
    return {
        "status": plan.status,
        "x0": plan.x0.tolist(),
        "t0": plan.t0,
        "final_state": plan.final_state.tolist(),
        "final_time": plan.final_time,
        "total_energy": plan.total_energy,
        "steps": steps,
    }
