"""Minimum-energy control primitives for affine linear systems.

All quantities refer to the system

    x'(t) = A x(t) + f + B u(t)

on a horizon [t0, t].  The controllability Gramian is

    W(t) = int_{t0}^{t} e^{A(t - s)} B B^T e^{A^T(t - s)} ds

and the minimum-energy input that steers x0 at t0 to xf at tf is

    u(t) = B^T e^{A^T(tf - t)} W(tf)^{-1} (xf - g(tf))

where g is the zero-input (u = 0) trajectory.  The energy spent up to time t,
int u^T u, equals (x(t) - g(t))^T W(t)^{-1} (x(t) - g(t)), so the state at t
sits on the ellipsoid centered at g(t) whose semi-axes are sqrt(E d_i) along
the eigenvectors of W(t).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

RANK_RTOL = 1e-12
CONDITION_FLOOR = 1e-10


class InvalidInputError(ValueError):
    """Raised for non-finite or out-of-domain arguments."""


class InvalidHorizonError(ValueError):
    """Raised when a horizon [t0, t] is empty or reversed."""


class UncontrollableHorizonError(np.linalg.LinAlgError):
    """The Gramian over the requested horizon is numerically singular.

    ``directions`` holds the eigenvectors (as columns) whose eigenvalues fall
    below the condition floor.
    """

    def __init__(self, message: str, directions: np.ndarray, eigenvalues: np.ndarray):
        super().__init__(message)
        self.directions = directions
        self.eigenvalues = eigenvalues


class DegenerateEllipsoidWarning(UserWarning):
    pass


def _as_vector(x, n: Optional[int] = None, name: str = "x") -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise InvalidInputError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return v


# ---------------------------------------------------------------------------
# matrix exponential
# ---------------------------------------------------------------------------

# Largest 1-norm for which the [m/m] Pade approximant meets double precision
# backward error (Higham 2005).
_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


@lru_cache(maxsize=None)
def _pade_coefficients(m: int) -> tuple:
    f = math.factorial
    return tuple(
        f(2 * m - j) * f(m) / (f(2 * m) * f(j) * f(m - j)) for j in range(m + 1)
    )


def _pade(A: np.ndarray, m: int) -> np.ndarray:
    c = _pade_coefficients(m)
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    powers = [ident]
    for _ in range(m // 2):
        powers.append(powers[-1] @ A2)
    even = sum(c[2 * k] * powers[k] for k in range(m // 2 + 1))
    odd = A @ sum(c[2 * k + 1] * powers[k] for k in range((m - 1) // 2 + 1))
    return np.linalg.solve(even - odd, even + odd)


def mat_exp(A, dt: float = 1.0) -> np.ndarray:
    """Return ``exp(A * dt)`` by scaling and squaring with a Pade approximant.

    The Pade degree is the smallest of 3, 5, 7, 9, 13 whose norm bound covers
    ``||A dt||_1``; otherwise the matrix is scaled by 2**-s to fit degree 13
    and the result is squared s times.
    """
    M = np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    if not (np.all(np.isfinite(M)) and np.isfinite(dt)):
        raise InvalidInputError("matrix exponential of non-finite input")
    n = M.shape[0]
    if dt == 0 or n == 0:
        return np.eye(n)
    M = M * dt
    norm = np.linalg.norm(M, 1)
    if norm == 0:
        return np.eye(n)
    for m in (3, 5, 7, 9):
        if norm <= _PADE_THETA[m]:
            return _pade(M, m)
    s = max(0, int(math.ceil(math.log2(norm / _PADE_THETA[13]))))
    R = _pade(M / 2.0**s, 13)
    for _ in range(s):
        R = R @ R
    return R


# ---------------------------------------------------------------------------
# data types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Affine linear model ``x' = A x + f + B u`` anchored at ``x_ref``."""

    A: np.ndarray
    B: np.ndarray
    f: Optional[np.ndarray] = None
    x_ref: Optional[np.ndarray] = None
    t_ref: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidInputError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B.reshape(n, -1)
        if B.shape[0] != n:
            raise InvalidInputError(f"B has {B.shape[0]} rows, expected {n}")
        check_driver_matrix(B)
        f = np.zeros(n) if self.f is None else _as_vector(self.f, n, "f")
        x_ref = np.zeros(n) if self.x_ref is None else _as_vector(self.x_ref, n, "x_ref")
        if not np.all(np.isfinite(A)):
            raise InvalidInputError("A has non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "x_ref", x_ref)
        object.__setattr__(self, "t_ref", float(self.t_ref))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    def vector_field(self, x, u=None) -> np.ndarray:
        dx = x @ self.A.T + self.f
        if u is not None:
            dx = dx + u @ self.B.T
        return dx


def check_driver_matrix(B: np.ndarray) -> None:
    """Validate a 0/1 driver incidence matrix: one receiving node per input."""
    if not np.all((B == 0) | (B == 1)):
        raise InvalidInputError("B entries must be 0 or 1")
    if B.shape[1] and not np.all(B.sum(axis=0) == 1):
        raise InvalidInputError("each input (column of B) must drive exactly one node")


@dataclass(frozen=True, eq=False)
class GramianFactorization:
    """Gramian ``W`` over ``horizon`` with its eigenpairs sorted descending."""

    W: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    horizon: tuple

    @classmethod
    def from_matrix(cls, W, horizon) -> "GramianFactorization":
        W = np.asarray(W, dtype=float)
        W = 0.5 * (W + W.T)
        d, V = np.linalg.eigh(W)
        order = np.argsort(d)[::-1]
        return cls(W, d[order], V[:, order], tuple(float(t) for t in horizon))

    @property
    def rank_tol(self) -> float:
        return RANK_RTOL * max(float(self.eigenvalues[0]), 0.0)

    @property
    def controllable(self) -> bool:
        return bool(self.eigenvalues[-1] > self.rank_tol)

    @property
    def condition_ratio(self) -> float:
        """``d_min / d_max``; 0 for a zero Gramian."""
        dmax = float(self.eigenvalues[0])
        if dmax <= 0:
            return 0.0
        return float(self.eigenvalues[-1]) / dmax

    def controllable_mask(self) -> np.ndarray:
        return self.eigenvalues > self.rank_tol

    def require_invertible(self) -> None:
        if self.condition_ratio < CONDITION_FLOOR:
            dmax = max(float(self.eigenvalues[0]), 0.0)
            bad = self.eigenvalues < CONDITION_FLOOR * dmax if dmax > 0 else np.ones_like(self.eigenvalues, bool)
            t0, t = self.horizon
            raise UncontrollableHorizonError(
                f"Gramian over [{t0:g}, {t:g}] is numerically singular "
                f"(d_min/d_max = {self.condition_ratio:.3e} < {CONDITION_FLOOR:g}); "
                f"{int(bad.sum())} deficient eigendirection(s): "
                f"{np.array2string(self.eigenvectors[:, bad].T, precision=4)}",
                self.eigenvectors[:, bad],
                self.eigenvalues[bad],
            )

    def solve(self, v) -> np.ndarray:
        """Return ``W^{-1} v`` through the eigendecomposition."""
        self.require_invertible()
        V, d = self.eigenvectors, self.eigenvalues
        return V @ ((V.T @ v) / d)

    def inverse_quadratic(self, v) -> np.ndarray:
        """``v^T W^{-1} v`` for a vector or a stack of row vectors."""
        self.require_invertible()
        z = np.asarray(v) @ self.eigenvectors
        return np.sum(z**2 / self.eigenvalues, axis=-1)


@dataclass(frozen=True, eq=False)
class SteeringProblem:
    model: LinearModel
    x0: np.ndarray
    t0: float
    xf: np.ndarray
    tf: float

    def __post_init__(self):
        n = self.model.n_states
        object.__setattr__(self, "x0", _as_vector(self.x0, n, "x0"))
        object.__setattr__(self, "xf", _as_vector(self.xf, n, "xf"))
        if not self.tf > self.t0:
            raise InvalidHorizonError(f"tf={self.tf} must exceed t0={self.t0}")


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """Closed-form minimum-energy input for one :class:`SteeringProblem`.

    ``costate`` is ``W(tf)^{-1} gap``; the input at time t is
    ``B^T exp(A^T (tf - t)) costate``.
    """

    model: LinearModel
    x0: np.ndarray
    t0: float
    xf: np.ndarray
    tf: float
    gramian: GramianFactorization
    gap: np.ndarray
    energy: float
    costate: np.ndarray = field(repr=False)

    def _propagated_costate(self, t) -> np.ndarray:
        return mat_exp(self.model.A.T, self.tf - t) @ self.costate

    def u(self, t) -> np.ndarray:
        """Input at time ``t`` (scalar), or a (len(t), M) array for a sequence."""
        if np.ndim(t) == 0:
            return self.model.B.T @ self._propagated_costate(float(t))
        return np.array([self.u(float(s)) for s in t]).reshape(len(t), self.model.n_inputs)

    def state(self, t: float) -> np.ndarray:
        """State of the linear model under this law: g(t) + W(t) e^{A^T(tf-t)} costate."""
        g = zero_input_trajectory(self.model, self.x0, self.t0, t)
        if t == self.t0:
            return g
        W = gramian_matrix(self.model, self.t0, t)
        return g + W @ self._propagated_costate(t)

    def energy_to(self, t: float) -> float:
        """Closed-form ``int_{t0}^{t} u^T u``."""
        if t == self.t0:
            return 0.0
        mu = self._propagated_costate(t)
        return float(mu @ gramian_matrix(self.model, self.t0, t) @ mu)

    def to_dict(self) -> dict:
        return {
            "A": self.model.A.tolist(),
            "B": self.model.B.tolist(),
            "f": self.model.f.tolist(),
            "x_ref": self.model.x_ref.tolist(),
            "t0": self.t0,
            "tf": self.tf,
            "x0": self.x0.tolist(),
            "xf": self.xf.tolist(),
            "costate": self.costate.tolist(),
            "energy": self.energy,
        }


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def gramian_matrix(model: LinearModel, t0: float, t: float) -> np.ndarray:
    """Controllability Gramian over [t0, t] via the Van Loan block exponential.

    exp([[-A, B B^T], [0, A^T]] (t - t0)) = [[*, F12], [0, F22]] and
    W = F22^T F12.
    """
    if not t > t0:
        raise InvalidHorizonError(f"Gramian horizon requires t > t0, got t0={t0}, t={t}")
    n = model.n_states
    A, B = model.A, model.B
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = B @ B.T
    M[n:, n:] = A.T
    E = mat_exp(M, t - t0)
    W = E[n:, n:].T @ E[:n, n:]
    return 0.5 * (W + W.T)


def gramian(model: LinearModel, t0: float, t: float) -> GramianFactorization:
    """Gramian over [t0, t] with its eigendecomposition.

    A singular Gramian is not an error here; check
    :attr:`GramianFactorization.controllable`.
    """
    return GramianFactorization.from_matrix(gramian_matrix(model, t0, t), (t0, t))


def zero_input_trajectory(model: LinearModel, x0, t0: float, t: float) -> np.ndarray:
    """g(t) = e^{A(t-t0)} x0 + int_0^{t-t0} e^{A s} ds f."""
    n = model.n_states
    x0 = _as_vector(x0, n, "x0")
    if t < t0:
        raise InvalidHorizonError(f"zero-input trajectory needs t >= t0, got t={t} < t0={t0}")
    if t == t0:
        return x0.copy()
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = model.A
    M[:n, n] = model.f
    E = mat_exp(M, t - t0)
    return E[:n, :n] @ x0 + E[:n, n]


def min_energy_control(problem: SteeringProblem) -> ControlLaw:
    """Solve the fixed-endpoint minimum-energy problem in closed form.

    Raises:
        UncontrollableHorizonError: if ``d_min / d_max`` of W(tf) is below
            ``CONDITION_FLOOR``.
    """
    m = problem.model
    fact = gramian(m, problem.t0, problem.tf)
    g_f = zero_input_trajectory(m, problem.x0, problem.t0, problem.tf)
    gap = problem.xf - g_f
    costate = fact.solve(gap)
    energy = float(max(gap @ costate, 0.0))
    return ControlLaw(m, problem.x0, problem.t0, problem.xf, problem.tf, fact, gap, energy, costate)


def steer(model: LinearModel, x0, t0: float, xf, tf: float) -> ControlLaw:
    return min_energy_control(SteeringProblem(model, x0, t0, xf, tf))


def control_energy_at(law: ControlLaw, x, t: float) -> float:
    """Energy needed to be at ``x`` at time ``t``: (x - g)^T W(t)^{-1} (x - g)."""
    if not (law.t0 < t <= law.tf):
        raise InvalidHorizonError(f"t={t} outside ({law.t0}, {law.tf}]")
    x = _as_vector(x, law.model.n_states)
    if t == law.tf:
        fact = law.gramian
    else:
        fact = gramian(law.model, law.t0, t)
    gap = x - zero_input_trajectory(law.model, law.x0, law.t0, t)
    return float(max(fact.inverse_quadratic(gap), 0.0))


@dataclass(frozen=True, eq=False)
class EnergyEllipsoid:
    """States reachable at time ``shape.horizon[1]`` with exactly ``energy``."""

    center: np.ndarray
    shape: GramianFactorization
    energy: float

    @property
    def n_states(self) -> int:
        return self.center.shape[0]

    @property
    def semi_axes(self) -> np.ndarray:
        return np.sqrt(self.energy * np.clip(self.shape.eigenvalues, 0.0, None))

    @property
    def axes(self) -> np.ndarray:
        """Principal directions as columns, matching :attr:`semi_axes`."""
        return self.shape.eigenvectors

    def membership(self, x) -> np.ndarray:
        """Quadratic-form residual ``(x-g)^T W^{-1} (x-g) - E``; negative inside.

        On a degenerate Gramian the form is taken on the controllable
        eigendirections only, and points with a component outside that
        subspace get ``+inf``.
        """
        d = np.asarray(x, dtype=float) - self.center
        z = d @ self.shape.eigenvectors
        mask = self.shape.controllable_mask()
        q = np.sum(z[..., mask] ** 2 / self.shape.eigenvalues[mask], axis=-1)
        if not mask.all():
            off = np.linalg.norm(z[..., ~mask], axis=-1)
            scale = 1e-9 * max(1.0, float(np.linalg.norm(self.semi_axes)))
            q = np.where(off > scale, np.inf, q)
        return q - self.energy

    def from_unit(self, s: np.ndarray) -> np.ndarray:
        """Map points of the unit ball/sphere (rows) into state space."""
        return self.center + (s * self.semi_axes) @ self.axes.T

    def axis_endpoints(self) -> np.ndarray:
        """(N, 2, N) array: for each axis, its two endpoints."""
        V, r = self.axes, self.semi_axes
        return np.stack([np.stack([self.center - r[i] * V[:, i], self.center + r[i] * V[:, i]]) for i in range(self.n_states)])

    def boundary(self, resolution: int = 200) -> np.ndarray:
        """Closed polyline of a planar ellipsoid, shape (resolution + 1, 2)."""
        if self.n_states != 2:
            raise InvalidInputError("boundary polyline needs a two-dimensional ellipsoid")
        theta = np.linspace(0.0, 2.0 * np.pi, resolution + 1)
        theta[-1] = 0.0
        return self.from_unit(np.column_stack([np.cos(theta), np.sin(theta)]))


def energy_ellipsoid(model: LinearModel, x0, t0: float, t: float, E: float) -> EnergyEllipsoid:
    if not (np.isfinite(E) and E > 0):
        raise InvalidInputError(f"ellipsoid energy must be positive, got {E}")
    center = zero_input_trajectory(model, x0, t0, t)
    return EnergyEllipsoid(center, gramian(model, t0, t), float(E))


def ellipsoid_membership(ell: EnergyEllipsoid, x) -> float:
    return float(ell.membership(x))


def unit_sphere_samples(n: int, count: int, rng_seed) -> np.ndarray:
    # one child stream per sample index keeps draws independent of batching
    seq = rng_seed if isinstance(rng_seed, np.random.SeedSequence) else np.random.SeedSequence(rng_seed)
    children = seq.spawn(count)
    z = np.array([np.random.default_rng(c).standard_normal(n) for c in children]).reshape(count, n)
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return z / norms


def sample_ellipsoid_surface(ell: EnergyEllipsoid, Q: int, rng_seed=0) -> np.ndarray:
    """Q points on the ellipsoid surface, pushed forward from the unit sphere.

    With a degenerate Gramian the sphere is taken in the controllable
    eigendirections only and a :class:`DegenerateEllipsoidWarning` is issued.
    """
    if Q < 1:
        raise InvalidInputError(f"Q must be at least 1, got {Q}")
    mask = ell.shape.controllable_mask()
    k = int(mask.sum())
    if k == 0:
        raise InvalidInputError("Gramian has no controllable direction")
    s = np.zeros((Q, ell.n_states))
    s[:, mask] = unit_sphere_samples(k, Q, rng_seed)
    if k < ell.n_states:
        warnings.warn(
            f"Gramian rank {k} < {ell.n_states}; sampling the controllable subspace only",
            DegenerateEllipsoidWarning,
            stacklevel=2,
        )
    return ell.from_unit(s)
