"""Numerical trajectories of the catalog systems and the certificate oracles.

Fixed-step classical RK4 on quadratic benchmark objectives; accuracy is judged
by step halving rather than adaptivity, which keeps runs reproducible.
Second-order systems integrate the state (x, dx/dt); first-order systems carry
x alone and solve the (possibly Hessian-weighted) mass matrix for dx/dt.

The oracles here close the loop on the symbolic pipeline: along a trajectory
the pair identity d/dt[e^gamma (p + f - f*)] + e^gamma q = 0 must hold exactly,
with lambda and theta recovered pointwise from their defining identities, so
any residual beyond discretization error indicates a wrong operation rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .expr import Expr, GammaForm
from .pq import PQPair, entry_fn
from .systems import OdeSystemSpec


class SimulationError(Exception):
    pass


class SingularMassMatrixError(SimulationError):
    pass


@dataclass(frozen=True)
class QuadraticObjective:
    """f(x) = sum_i e_i (x_i - x*_i)^2 / 2 on eigenvalues e_i in [mu, L]."""

    eigenvalues: np.ndarray
    xstar: np.ndarray

    @staticmethod
    def log_spaced(dim: int, mu: float, L: float, xstar: np.ndarray | None = None):
        eigs = np.geomspace(mu, L, dim) if mu < L else np.full(dim, mu)
        return QuadraticObjective(eigs, np.zeros(dim) if xstar is None else xstar)

    @staticmethod
    def from_eigenvalues(eigs, xstar=None):
        eigs = np.asarray(eigs, dtype=float)
        return QuadraticObjective(eigs, np.zeros(len(eigs)) if xstar is None else xstar)

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))
        object.__setattr__(self, "xstar", np.asarray(self.xstar, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    @property
    def mu(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def L(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def fstar(self) -> float:
        return 0.0

    def value(self, x: np.ndarray) -> float:
        d = x - self.xstar
        return 0.5 * float(np.dot(self.eigenvalues * d, d))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.eigenvalues * (x - self.xstar)

    def hess_diag(self) -> np.ndarray:
        return self.eigenvalues


@dataclass
class Trajectory:
    """A discretized solution with everything the oracles need recomputable."""

    system: OdeSystemSpec
    objective: QuadraticObjective
    params: dict[str, float]
    times: np.ndarray
    xs: np.ndarray  # (n, dim)
    vs: np.ndarray  # (n, dim), dx/dt
    gaps: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.xs - self.objective.xstar
        self.gaps = 0.5 * np.einsum("j,ij,ij->i", self.objective.eigenvalues, d, d)

    def basis_vectors(self) -> tuple[np.ndarray, ...]:
        """(v1..v5) arrays of shape (n, dim); v5 is recovered from the ODE."""
        obj, eigs = self.objective, self.objective.eigenvalues
        v1 = self.xs - obj.xstar
        v2 = eigs * v1
        v3 = self.vs
        v4 = eigs * v3
        c = [_coeff_fn(e, self.params) for e in self.system.coeffs]
        t = self.times[:, None]
        if self.system.second_order:
            v5 = -(c[0](t) * v1 + c[1](t) * v2 + c[2](t) * v3 + c[3](t) * v4) / c[4](t)
        else:
            dc = [_coeff_fn(e.diff(), self.params) for e in self.system.coeffs]
            rhs = dc[0](t) * v1 + dc[1](t) * v2 + (c[0](t) + dc[2](t)) * v3 \
                + (c[1](t) + dc[3](t)) * v4
            v5 = -rhs / (c[2](t) + c[3](t) * eigs)
        return v1, v2, v3, v4, v5


def _coeff_fn(e: Expr, params: Mapping[str, float]):
    if not e:
        return lambda t: 0.0
    compiled = []
    for exp, mono, coeff in e.terms():
        ex = float(exp[0])
        if exp[1]:
            ex += float(exp[1]) * params["alpha"]
        base = float(coeff)
        for sym, power in mono:
            base *= params[sym] ** power
        compiled.append((base, ex))
    if len(compiled) == 1 and compiled[0][1] == 0.0:
        value = compiled[0][0]
        return lambda t: value
    def fn(t):
        return sum(base * t ** ex for base, ex in compiled)
    return fn


def integrate(system: OdeSystemSpec, obj: QuadraticObjective, x0, v0,
              t0: float, t1: float, dt: float,
              params: Mapping[str, float] | None = None) -> Trajectory:
    """Classical RK4 with fixed step dt from t0 to t1.

    Systems whose coefficients carry negative powers of t need t0 > 0.  For
    first-order systems the state is x alone; dx/dt solves
    (c3 I + c4 hess f) dx/dt = -(c1 (x - x*) + c2 grad f), and the mass matrix
    must be nonsingular.
    """
    if dt <= 0:
        raise SimulationError("dt must be positive")
    params = dict(params or {})
    unbound = set().union(*(c.free_symbols() for c in system.coeffs)) - set(params)
    if unbound:
        raise SimulationError(f"unbound system parameters: {sorted(unbound)}")
    singular_at_zero = any(exp[0] < 0 or exp[1] < 0
                           for c in system.coeffs for exp, _m, _c in c.terms())
    if t0 <= 0 and singular_at_zero:
        raise SimulationError("t0 must be positive for coefficients singular at t = 0")

    c = [_coeff_fn(e, params) for e in system.coeffs]
    eigs = obj.eigenvalues
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)

    n_steps = max(int(round((t1 - t0) / dt)), 1)
    times = t0 + dt * np.arange(n_steps + 1)

    if system.second_order:
        def deriv(t, state):
            x, v = state
            v1 = x - obj.xstar
            acc = -(c[0](t) * v1 + c[1](t) * (eigs * v1) + (c[2](t) + c[3](t) * eigs) * v)
            return (v, acc / c[4](t))

        state = (x0.copy(), v0.copy())
        xs, vs = [x0.copy()], [v0.copy()]
        for t in times[:-1]:
            state = _rk4_step(deriv, t, state, dt)
            xs.append(state[0].copy())
            vs.append(state[1].copy())
        return Trajectory(system, obj, params, times, np.array(xs), np.array(vs))

    def velocity(t, x):
        mass = c[2](t) + c[3](t) * eigs
        if np.min(np.abs(mass)) < 1e-12:
            raise SingularMassMatrixError(
                f"mass matrix c3 + c4*e is singular at t={t:.6g}")
        v1 = x - obj.xstar
        return -(c[0](t) * v1 + c[1](t) * (eigs * v1)) / mass

    def deriv(t, state):
        (x,) = state
        return (velocity(t, x),)

    state = (x0.copy(),)
    xs, vs = [x0.copy()], [velocity(t0, x0)]
    for t in times[:-1]:
        state = _rk4_step(deriv, t, state, dt)
        xs.append(state[0].copy())
        vs.append(velocity(t + dt, state[0]))
    return Trajectory(system, obj, params, times, np.array(xs), np.array(vs))


def _rk4_step(deriv, t, state, dt):
    k1 = deriv(t, state)
    k2 = deriv(t + dt / 2, tuple(s + dt / 2 * k for s, k in zip(state, k1)))
    k3 = deriv(t + dt / 2, tuple(s + dt / 2 * k for s, k in zip(state, k2)))
    k4 = deriv(t + dt, tuple(s + dt * k for s, k in zip(state, k3)))
    return tuple(s + dt / 6 * (a + 2 * b + 2 * c + d)
                 for s, a, b, c, d in zip(state, k1, k2, k3, k4))


# -- rate fitting ----------------------------------------------------------------


@dataclass
class RateFit:
    k: float
    residual: float
    window: tuple[float, float]
    truncated: bool  # gap underflow shortened the fit window


GAP_FLOOR = 1e-290


def measure_rate(traj: Trajectory, gamma: GammaForm, params: Mapping[str, float],
                 window: tuple[float, float] | None = None) -> RateFit:
    """Least-squares slope of log(gap) against the gamma shape.

    By default the trailing half of the trajectory is used; the fitted k is
    the decay coefficient in gap ~ exp(-k * shape(t)).
    """
    t, gap = traj.times, traj.gaps
    if window is None:
        window = (t[len(t) // 2], t[-1])
    mask = (t >= window[0]) & (t <= window[1])
    truncated = bool(np.any(gap[mask] <= GAP_FLOOR))
    mask &= gap > GAP_FLOOR
    if mask.sum() < 2:
        raise SimulationError("not enough positive-gap points in the fit window")
    x = np.asarray(gamma.shape(t[mask], dict(params)), dtype=float)
    y = np.log(gap[mask])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return RateFit(k=-float(slope), residual=residual,
                   window=(float(t[mask][0]), float(t[mask][-1])), truncated=truncated)


# -- conservation oracle -----------------------------------------------------------


def pointwise_multipliers(traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """lambda(t), theta(t) from their defining identities, plus a validity mask.

    lambda: f* - f - <grad f, x* - x> = lambda/2 ||x - x*||^2
    theta:  <hess f dx/dt, dx/dt> = theta ||dx/dt||^2
    Each multiplier is defined wherever its own denominator is nonzero; the
    returned mask marks points where both are.  An undefined multiplier only
    ever scales a vanishing quadratic term (lambda sits on the (1,1) diagonal,
    theta on (3,3)), so the zero fill keeps evaluated forms exact.
    """
    v1, _v2, v3, v4, _v5 = traj.basis_vectors()
    n1 = np.einsum("ij,ij->i", v1, v1)
    n3 = np.einsum("ij,ij->i", v3, v3)
    bregman = -traj.gaps + np.einsum("ij,ij->i", traj.objective.eigenvalues * v1, v1)
    ok1 = np.sqrt(n1) > 1e-12
    ok3 = np.sqrt(n3) > 1e-12
    lam = np.where(ok1, 2.0 * bregman / np.where(ok1, n1, 1.0), 0.0)
    theta = np.where(ok3, np.einsum("ij,ij->i", v4, v3) / np.where(ok3, n3, 1.0), 0.0)
    return lam, theta, ok1 & ok3


def pair_forms_on_trajectory(pair: PQPair, gamma: GammaForm, traj: Trajectory,
                             params: Mapping[str, float]):
    """Arrays E(t) = e^gamma (p-form + gap) and e^gamma q-form along a trajectory."""
    vs = traj.basis_vectors()
    lam, theta, mask = pointwise_multipliers(traj)
    t = traj.times
    egamma = np.exp(np.asarray(gamma.value(t, dict(params)), dtype=float))

    def quad(matrix_entry, dim):
        total = np.zeros_like(t)
        for i in range(1, dim + 1):
            for j in range(i, dim + 1):
                entry = matrix_entry(i, j)
                if not entry:
                    continue
                weight = 1.0 if i == j else 2.0
                coeff = entry_fn(entry, gamma, params)(t, lam, theta)
                total += weight * coeff * np.einsum("ij,ij->i", vs[i - 1], vs[j - 1])
        return total

    energy = egamma * (quad(pair.p_entry, 3) + traj.gaps)
    q_form = egamma * quad(pair.q_entry, 5)
    return energy, q_form, mask


def conservation_check(pair: PQPair, gamma: GammaForm, traj: Trajectory,
                       params: Mapping[str, float]) -> float:
    """Maximum normalized residual of dE/dt + e^gamma q = 0 along the trajectory.

    The derivative is taken by central differences, so the residual measures
    discretization error only; halving dt should shrink it about fourfold.
    """
    energy, q_form, mask = pair_forms_on_trajectory(pair, gamma, traj, params)
    t = traj.times
    d_energy = (energy[2:] - energy[:-2]) / (t[2:] - t[:-2])
    residual = np.abs(d_energy + q_form[1:-1]) / (1.0 + np.abs(q_form[1:-1]))
    inner_mask = mask[1:-1]
    if not inner_mask.any():
        raise SimulationError("no valid points for the conservation residual")
    return float(residual[inner_mask].max())


# -- solver sanity ---------------------------------------------------------------


def kinetic_energy_decay(traj: Trajectory) -> float:
    """Max increase of ||dx/dt||^2/2 + gap; friction should dissipate it."""
    e = 0.5 * np.einsum("ij,ij->i", traj.vs, traj.vs) + traj.gaps
    return float(np.max(np.diff(e) / (1.0 + np.abs(e[:-1]))))
