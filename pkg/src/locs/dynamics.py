"""Affine nonlinear networks, their pointwise linearization, and validity regions.

A network is ``x' = F(x) + B u`` with a 0/1 driver matrix ``B``.  Linearizing
at ``x_p`` gives ``x' ~ f_p + A_p x + B u`` with ``A_p = dF/dx(x_p)`` and
``f_p = F(x_p) - A_p x_p``.  The affine model is trusted on the set of states
where ``||F(x) - f_p - A_p x||_2 <= epsilon``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .linsys import (
    EnergyEllipsoid,
    InvalidInputError,
    LinearModel,
    check_driver_matrix,
    unit_sphere_samples,
)

VectorField = Callable[[np.ndarray], np.ndarray]


class InvalidPointError(ValueError):
    """F or its Jacobian is not finite at the requested point."""


def fd_jacobian(F: VectorField, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step ``max(1e-6, 1e-8 ||x||)``."""
    x = np.asarray(x, dtype=float)
    h = max(1e-6, 1e-8 * float(np.linalg.norm(x)))
    n = x.shape[0]
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2 * h)
    return J


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    """Vector field ``F`` plus driver matrix ``B``.

    ``F`` maps an N-vector to an N-vector.  When ``vectorized`` is set, it
    also maps a (K, N) stack row-wise, which speeds up region probing.
    ``jacobian`` is optional; central differences are used without it.
    """

    F: VectorField
    B: np.ndarray
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    parameters: Mapping[str, float] = field(default_factory=dict)
    name: str = "custom"
    vectorized: bool = False

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        check_driver_matrix(B)
        rows = B.sum(axis=1)
        if not np.all((rows == 0) | (rows == 1)):
            raise InvalidInputError("each node may receive at most one input")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "parameters", dict(self.parameters))

    @property
    def n_states(self) -> int:
        return self.B.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def driver_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.B.sum(axis=1))

    def vector_field(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1 or self.vectorized:
            return np.asarray(self.F(x), dtype=float)
        return np.array([self.F(row) for row in x], dtype=float).reshape(x.shape)

    def jac(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return fd_jacobian(self.F, x)

    def rhs(self, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.vector_field(x) + self.B @ u


def linearize(system: NonlinearSystem, x_p, t_ref: float = 0.0) -> LinearModel:
    x_p = np.asarray(x_p, dtype=float).reshape(-1)
    Fp = system.vector_field(x_p)
    A = system.jac(x_p)
    if not (np.all(np.isfinite(Fp)) and np.all(np.isfinite(A)) and np.all(np.isfinite(x_p))):
        raise InvalidPointError(f"vector field or Jacobian not finite at {x_p}")
    return LinearModel(A, system.B, Fp - A @ x_p, x_p, t_ref)


@dataclass(frozen=True, eq=False)
class ValidRegion:
    """States where the affine model at ``base.x_ref`` is within ``epsilon`` of F."""

    base: LinearModel
    epsilon: float
    system: NonlinearSystem

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def at(cls, system: NonlinearSystem, x_p, epsilon: float, t_ref: float = 0.0) -> "ValidRegion":
        return cls(linearize(system, x_p, t_ref), float(epsilon), system)

    def residual(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        affine = x @ self.base.A.T + self.base.f
        return np.linalg.norm(self.system.vector_field(x) - affine, axis=-1)

    def contains(self, x) -> np.ndarray:
        return self.residual(x) <= self.epsilon


def linearization_residual(region: ValidRegion, x) -> float:
    return float(region.residual(np.asarray(x, dtype=float).reshape(-1)))


class ContainmentResult(NamedTuple):
    contained: bool
    worst_residual: float
    worst_point: np.ndarray


def probe_points(ell: EnergyEllipsoid, n_probe: int, rng_seed=0) -> np.ndarray:
    """Half surface points, half interior points uniform in volume."""
    if n_probe < 1:
        raise InvalidInputError(f"n_probe must be at least 1, got {n_probe}")
    n = ell.n_states
    n_surface = (n_probe + 1) // 2
    seq = np.random.SeedSequence(rng_seed)
    s_seed, r_seed = seq.spawn(2)
    s = unit_sphere_samples(n, n_probe, s_seed)
    radii = np.ones(n_probe)
    radii[n_surface:] = np.random.default_rng(r_seed).random(n_probe - n_surface) ** (1.0 / n)
    return ell.from_unit(s * radii[:, None])


def ellipsoid_within_region(
    ell: EnergyEllipsoid,
    region: ValidRegion,
    n_probe: int = 256,
    rng_seed=0,
    epsilon: Optional[float] = None,
) -> ContainmentResult:
    """Monte Carlo check that ``ell`` lies inside ``region``.

    The center is always probed in addition to ``n_probe`` random points.
    ``epsilon`` overrides the region's threshold (e.g. a shrunken one).
    """
    eps = region.epsilon if epsilon is None else epsilon
    pts = np.vstack([ell.center[None, :], probe_points(ell, n_probe, rng_seed)])
    res = region.residual(pts)
    k = int(np.argmax(res))
    return ContainmentResult(bool(res[k] <= eps), float(res[k]), pts[k])


@dataclass(frozen=True)
class TargetSet:
    """Desired region of state space: a ball, a box, or a custom predicate."""

    kind: str
    center: Optional[tuple] = None
    radius: Optional[float] = None
    lower: Optional[tuple] = None
    upper: Optional[tuple] = None
    predicate: Optional[Callable[[np.ndarray], bool]] = field(default=None, compare=False)

    @classmethod
    def ball(cls, center, radius: float) -> "TargetSet":
        if not radius > 0:
            raise InvalidInputError("ball radius must be positive")
        return cls("ball", center=tuple(float(c) for c in center), radius=float(radius))

    @classmethod
    def box(cls, lower, upper) -> "TargetSet":
        lo, hi = tuple(map(float, lower)), tuple(map(float, upper))
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise InvalidInputError("box bounds must satisfy lower <= upper")
        return cls("box", lower=lo, upper=hi)

    @classmethod
    def custom(cls, predicate, center=None) -> "TargetSet":
        return cls("custom", center=None if center is None else tuple(map(float, center)), predicate=predicate)

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            return bool(np.linalg.norm(x - np.asarray(self.center)) <= self.radius)
        if self.kind == "box":
            return bool(np.all(x >= np.asarray(self.lower)) and np.all(x <= np.asarray(self.upper)))
        if self.kind == "custom":
            return bool(self.predicate(x))
        raise InvalidInputError(f"unknown target kind {self.kind!r}")

    @property
    def anchor(self) -> np.ndarray:
        """Representative point: ball center or box midpoint."""
        if self.kind == "box":
            return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))
        if self.center is None:
            raise InvalidInputError("custom target needs an explicit center")
        return np.asarray(self.center, dtype=float)

    def to_dict(self) -> dict:
        if self.kind == "ball":
            return {"kind": "ball", "center": list(self.center), "radius": self.radius}
        if self.kind == "box":
            return {"kind": "box", "lower": list(self.lower), "upper": list(self.upper)}
        raise InvalidInputError("custom targets are not serializable")

    @classmethod
    def from_dict(cls, d: Mapping) -> "TargetSet":
        kind = d.get("kind")
        if kind == "ball":
            return cls.ball(d["center"], d["radius"])
        if kind == "box":
            return cls.box(d["lower"], d["upper"])
        raise InvalidInputError(f"unknown target kind {kind!r}")


# ---------------------------------------------------------------------------
# polynomial vector fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Monomial:
    coefficient: float
    exponents: tuple


def polynomial_system(
    n_states: int,
    equations: Sequence[Sequence[Monomial]],
    inputs: Sequence[tuple],
    n_inputs: Optional[int] = None,
    name: str = "polynomial",
) -> NonlinearSystem:
    """Build a system whose i-th equation is a sum of monomials.

    ``inputs`` lists (node, input) pairs, both zero-based.
    """
    if len(equations) != n_states:
        raise InvalidInputError(f"{len(equations)} equations for {n_states} states")
    m = n_inputs if n_inputs is not None else (max((k for _, k in inputs), default=-1) + 1)
    B = np.zeros((n_states, m))
    for node, k in inputs:
        if not (0 <= node < n_states and 0 <= k < m):
            raise InvalidInputError(f"input pair ({node}, {k}) out of range")
        B[node, k] = 1.0
    coeffs, exps = [], []
    for i, eq in enumerate(equations):
        for term in eq:
            e = tuple(int(p) for p in term.exponents)
            if len(e) != n_states or any(p < 0 for p in e):
                raise InvalidInputError(f"bad exponent vector {term.exponents} in equation {i}")
            coeffs.append((i, float(term.coefficient)))
            exps.append(e)
    rows = np.array([i for i, _ in coeffs], dtype=int)
    c = np.array([v for _, v in coeffs], dtype=float)
    P = np.array(exps, dtype=int).reshape(len(exps), n_states)
    S = np.zeros((len(exps), n_states))
    S[np.arange(len(exps)), rows] = 1.0

    def F(x):
        x = np.asarray(x, dtype=float)
        return (c * np.prod(x[..., None, :] ** P, axis=-1)) @ S

    def J(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros((n_states, n_states))
        for j in range(n_states):
            dP = P.copy()
            dP[:, j] -= 1
            mask = P[:, j] > 0
            if not mask.any():
                continue
            vals = c[mask] * P[mask, j] * np.prod(x ** dP[mask], axis=-1)
            np.add.at(out[:, j], rows[mask], vals)
        return out

    return NonlinearSystem(F, B, J, {}, name, vectorized=True)


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def fig1_linear() -> NonlinearSystem:
    """x1' = x2 + u, x2' = -x1."""
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])

    def F(x):
        x = np.asarray(x, dtype=float)
        return x @ A.T

    return NonlinearSystem(F, np.array([[1.0], [0.0]]), lambda x: A.copy(), {}, "fig1_linear", vectorized=True)


def fig2_nonlinear(a: float = 3.0) -> NonlinearSystem:
    """x1' = (x1 - a)(x2 - 2), x2' = x2 (x1 - 1)(x2 - 1) + u."""

    def F(x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([(x1 - a) * (x2 - 2.0), x2 * (x1 - 1.0) * (x2 - 1.0)], axis=-1)

    def J(x):
        x1, x2 = float(x[0]), float(x[1])
        return np.array(
            [
                [x2 - 2.0, x1 - a],
                [x2 * (x2 - 1.0), (x1 - 1.0) * (2.0 * x2 - 1.0)],
            ]
        )

    return NonlinearSystem(F, np.array([[0.0], [1.0]]), J, {"a": float(a)}, "fig2_nonlinear", vectorized=True)


_CATALOG = {
    "fig1_linear": fig1_linear,
    "fig2_nonlinear": fig2_nonlinear,
}


def builtin_models() -> dict:
    """Catalog entries at their default parameters, keyed by name."""
    return {name: factory() for name, factory in _CATALOG.items()}


def get_model(name: str, **parameters) -> NonlinearSystem:
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(sorted(_CATALOG))}") from None
    return factory(**parameters)
