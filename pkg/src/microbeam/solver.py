"""Static, transient and eigen solutions of the assembled beam system.

The governing system is  M q'' + C q' + (K_lin - N K_geo) q = f  with the
membrane force N recomputed from the deflected shape (fixed-point iteration
for statics, frozen per step for transients). Linear systems are solved in
symmetrically equilibrated variables because MEMS-scale stiffness entries
span many orders of magnitude between deflection and rotation DOFs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from . import kernels, model
from .errors import (
    ConvergenceError,
    DivergenceError,
    InvalidArgumentError,
    ModelError,
    SingularSystemError,
)


@dataclass(frozen=True)
class PointLoad:
    """Transverse point force (N) and optional moment (N*m) at a beam position.

    Exactly one of ``node`` (mesh node index) or ``position`` (arc length in
    meters) identifies the application point.
    """

    force: float
    node: int | None = None
    position: float | None = None
    moment: float = 0.0

    def __post_init__(self):
        if (self.node is None) == (self.position is None):
            raise InvalidArgumentError("specify exactly one of node= or position=")
        if not (math.isfinite(self.force) and math.isfinite(self.moment)):
            raise InvalidArgumentError("load magnitudes must be finite")

    def arc_position(self, config):
        if self.node is not None:
            if not 0 <= self.node < config.n_nodes:
                raise InvalidArgumentError(f"node {self.node} outside mesh")
            return self.node * config.element_length
        if not 0.0 <= self.position <= config.length * (1.0 + 1e-12):
            raise InvalidArgumentError(f"position {self.position} outside [0, L]")
        return min(self.position, config.length)


class LoadSet:
    """A collection of point loads, assembled into a consistent nodal vector."""

    def __init__(self, loads=()):
        self.loads = tuple(loads)

    @classmethod
    def at_node(cls, node, force, moment=0.0):
        return cls([PointLoad(force=force, node=node, moment=moment)])

    @classmethod
    def at_position(cls, position, force, moment=0.0):
        return cls([PointLoad(force=force, position=position, moment=moment)])

    @classmethod
    def empty(cls):
        return cls()

    def to_vector(self, config):
        f = np.zeros(config.n_dof)
        for load in self.loads:
            s = load.arc_position(config)
            f += model.consistent_point_load(config, s, load.force, load.moment)
        return f


@dataclass(frozen=True)
class SolveOptions:
    """Numerical controls shared by the static and transient solvers."""

    max_iterations: int = 50
    axial_tolerance: float = 1e-8
    dt: float = 1e-3
    damping_alpha: float = 0.0
    damping_beta: float = 0.0
    modal_modes: int | None = None
    newmark_beta: float = 0.25
    newmark_gamma: float = 0.5

    def __post_init__(self):
        if self.dt <= 0.0:
            raise InvalidArgumentError("dt must be positive")
        if self.axial_tolerance <= 0.0:
            raise InvalidArgumentError("axial_tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")


def _free_partition(matrices):
    free = matrices.free_dofs
    if free.size == 0:
        raise SingularSystemError("no free DOFs remain")
    return free


def _equilibration(k_ff):
    d = np.sqrt(np.abs(np.diag(k_ff)))
    d[d == 0.0] = 1.0
    return 1.0 / d


def _solve_spd(k_ff, rhs):
    """Cholesky solve with symmetric diagonal equilibration."""
    d = _equilibration(k_ff)
    scaled = (k_ff * d).T * d
    try:
        factor = scipy.linalg.cho_factor(scaled, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"constrained system is singular: {exc}") from exc
    return d * scipy.linalg.cho_solve(factor, d * rhs, check_finite=False)


def _effective_stiffness(matrices, axial_n, free):
    k = matrices.k_lin[np.ix_(free, free)]
    if axial_n != 0.0:
        k = k - axial_n * matrices.k_geo[np.ix_(free, free)]
    return k


def _constraint_rhs(matrices, axial_n, free):
    """RHS contribution from prescribed (non-zero) constrained DOFs."""
    values = matrices.prescribed_values()
    if not np.any(values):
        return 0.0
    fixed = matrices.constrained_dofs
    k_fc = matrices.k_lin[np.ix_(free, fixed)]
    if axial_n != 0.0:
        k_fc = k_fc - axial_n * matrices.k_geo[np.ix_(free, fixed)]
    return -k_fc @ values[fixed]


def _embed(matrices, free, q_f):
    q = matrices.prescribed_values()
    q[free] = q_f
    return q


def static_solve(config, loads, options=None, matrices=None):
    """Equilibrium state under the given loads with axial-force coupling.

    Fixed-point iteration: solve with the current membrane force N, recompute
    N from the deflected shape, repeat until the change is within
    ``options.axial_tolerance`` relative to max(1, |N|).
    """
    options = options or SolveOptions()
    matrices = matrices if matrices is not None else model.assemble_system(config)
    free = _free_partition(matrices)
    f_full = loads.to_vector(config) if isinstance(loads, LoadSet) else np.asarray(loads, float)

    axial_n = 0.0
    state = None
    for iteration in range(1, options.max_iterations + 1):
        k_ff = _effective_stiffness(matrices, axial_n, free)
        rhs = f_full[free] + _constraint_rhs(matrices, axial_n, free)
        q_f = _solve_spd(k_ff, rhs)
        q = _embed(matrices, free, q_f)
        state = model.BeamState(q, np.zeros_like(q), np.zeros_like(q), 0.0)
        n_next = model.axial_force(state, config)
        if abs(n_next - axial_n) <= options.axial_tolerance * max(1.0, abs(axial_n)):
            return state
        axial_n = n_next
    raise ConvergenceError(
        f"axial coupling did not converge in {options.max_iterations} iterations",
        last_state=state, last_axial_force=axial_n)


# ---------------------------------------------------------------------------
# Eigen solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModalBasis:
    """Mass-orthonormal mode shapes and angular frequencies of the free DOFs."""

    omegas: np.ndarray          # rad/s, ascending
    phi_free: np.ndarray        # (n_free, m)
    free_dofs: np.ndarray
    n_dof: int

    @property
    def frequencies_hz(self):
        return self.omegas / (2.0 * math.pi)

    def expand(self, eta):
        q = np.zeros(self.n_dof)
        q[self.free_dofs] = self.phi_free @ eta
        return q

    def mode_shape(self, i):
        return self.expand(np.eye(self.phi_free.shape[1])[:, i])


def _generalized_eigh(a_ff, b_ff, k):
    d = _equilibration(a_ff)
    a_s = (a_ff * d).T * d
    b_s = (b_ff * d).T * d
    vals, vecs = scipy.linalg.eigh(a_s, b_s, subset_by_index=[0, k - 1],
                                   check_finite=False)
    return vals, vecs * d[:, None]


def natural_frequencies(config, k, matrices=None, axial_n=0.0):
    """First k natural frequencies (Hz) and the matching modal basis.

    Solves K phi = omega^2 M phi on the free DOFs; pass ``axial_n`` to include
    the membrane contribution K_lin - N K_geo.
    """
    if k < 1:
        raise InvalidArgumentError("k must be >= 1")
    matrices = matrices if matrices is not None else model.assemble_system(config)
    free = _free_partition(matrices)
    if k > free.size:
        raise InvalidArgumentError(f"k={k} exceeds {free.size} free DOFs")
    k_ff = _effective_stiffness(matrices, axial_n, free)
    m_ff = matrices.mass[np.ix_(free, free)]
    vals, vecs = _generalized_eigh(k_ff, m_ff, k)
    omegas = np.sqrt(np.clip(vals, 0.0, None))
    basis = ModalBasis(omegas=omegas, phi_free=vecs, free_dofs=free,
                       n_dof=matrices.n_dof)
    return basis.frequencies_hz, basis


def buckling_load(config, matrices=None):
    """Critical compressive axial force from K_lin phi = P K_geo phi."""
    if config.boundary is model.BoundaryCondition.FREE_FREE:
        raise InvalidArgumentError("buckling requires a clamped boundary condition")
    matrices = matrices if matrices is not None else model.assemble_system(config)
    free = _free_partition(matrices)
    k_ff = matrices.k_lin[np.ix_(free, free)]
    g_ff = matrices.k_geo[np.ix_(free, free)]
    vals, _ = _generalized_eigh(k_ff, g_ff, free.size)
    positive = vals[vals > 0.0]
    if positive.size == 0:
        raise ModelError("no positive buckling factor found (sign convention?)")
    return float(positive.min())


@dataclass(frozen=True)
class ReducedModel:
    """Projection of the full system onto the lowest mass-orthonormal modes.

    Reduced mass is the identity, reduced bending stiffness diag(omega^2),
    and the geometric coupling enters as  diag(omega^2) - N * k_geo_reduced.
    """

    basis: ModalBasis
    k_geo_reduced: np.ndarray

    @property
    def m(self):
        return self.basis.omegas.size

    def stiffness(self, axial_n=0.0):
        k = np.diag(self.basis.omegas ** 2)
        if axial_n != 0.0:
            k = k - axial_n * self.k_geo_reduced
        return k

    def project_load(self, f_free):
        return self.basis.phi_free.T @ f_free

    def project_state(self, q_f, m_ff):
        return self.basis.phi_free.T @ (m_ff @ q_f)


def modal_reduce(config, m, matrices=None):
    """Reduced model over the first m modes of the constrained system."""
    matrices = matrices if matrices is not None else model.assemble_system(config)
    free = _free_partition(matrices)
    if not 1 <= m <= free.size:
        raise InvalidArgumentError(f"mode count {m} outside [1, {free.size}]")
    _, basis = natural_frequencies(config, m, matrices)
    g_ff = matrices.k_geo[np.ix_(free, free)]
    k_geo_r = basis.phi_free.T @ g_ff @ basis.phi_free
    return ReducedModel(basis=basis, k_geo_reduced=0.5 * (k_geo_r + k_geo_r.T))


# ---------------------------------------------------------------------------
# Transient integration
# ---------------------------------------------------------------------------

class TransientSolver:
    """Implicit Newmark stepping of one assembled system.

    Owns the free-DOF partitions (optionally modal-reduced) for a fixed
    configuration and constraint set; one instance serves one physics loop at
    a time. The membrane force is frozen at its start-of-step value, so each
    step is a pure function of (state, loads).
    """

    def __init__(self, config, options=None, matrices=None):
        self.config = config
        self.options = options or SolveOptions()
        self.matrices = matrices if matrices is not None else model.assemble_system(config)
        self.free = _free_partition(self.matrices)
        free = self.free
        self.m_ff = self.matrices.mass[np.ix_(free, free)]
        self.k_ff = self.matrices.k_lin[np.ix_(free, free)]
        self.g_ff = self.matrices.k_geo[np.ix_(free, free)]
        self.c_ff = (self.options.damping_alpha * self.m_ff
                     + self.options.damping_beta * self.k_ff)
        self.reduced = None
        if self.options.modal_modes:
            self.reduced = modal_reduce(config, self.options.modal_modes, self.matrices)
            lam = np.diag(self.reduced.basis.omegas ** 2)
            self.c_r = (self.options.damping_alpha * np.eye(self.reduced.m)
                        + self.options.damping_beta * lam)

    def step(self, state, loads):
        """Advance one time step; returns a new BeamState at t + dt."""
        opts = self.options
        f_full = loads.to_vector(self.config) if isinstance(loads, LoadSet) \
            else np.asarray(loads, float)
        axial_n = model.axial_force(state, self.config)
        f_free = f_full[self.free] + _constraint_rhs(self.matrices, axial_n, self.free)

        if self.reduced is not None:
            basis = self.reduced.basis
            eta = basis.phi_free.T @ (self.m_ff @ state.q[self.free])
            eta_d = basis.phi_free.T @ (self.m_ff @ state.q_dot[self.free])
            eta_dd = basis.phi_free.T @ (self.m_ff @ state.q_ddot[self.free])
            q1, v1, a1 = kernels.newmark_step(
                np.eye(self.reduced.m), self.c_r, self.reduced.stiffness(axial_n),
                self.reduced.project_load(f_free), eta, eta_d, eta_dd,
                opts.dt, opts.newmark_beta, opts.newmark_gamma)
            q_f, v_f, a_f = basis.phi_free @ q1, basis.phi_free @ v1, basis.phi_free @ a1
        else:
            k_eff = self.k_ff if axial_n == 0.0 else self.k_ff - axial_n * self.g_ff
            q_f, v_f, a_f = kernels.newmark_step(
                self.m_ff, self.c_ff, k_eff, f_free,
                state.q[self.free], state.q_dot[self.free], state.q_ddot[self.free],
                opts.dt, opts.newmark_beta, opts.newmark_gamma)

        if not (np.all(np.isfinite(q_f)) and np.all(np.isfinite(v_f))
                and np.all(np.isfinite(a_f))):
            raise DivergenceError("time step diverged (non-finite state); reduce dt")

        q = _embed(self.matrices, self.free, q_f)
        vel = np.zeros_like(q)
        acc = np.zeros_like(q)
        vel[self.free] = v_f
        acc[self.free] = a_f
        return model.BeamState(q, vel, acc, state.t + opts.dt)


def consistent_accelerations(state, config, loads, options=None, matrices=None):
    """State with q_ddot satisfying the equation of motion at the current q, q_dot.

    Use before starting a transient from a statically deflected shape;
    otherwise the first steps inject spurious energy.
    """
    options = options or SolveOptions()
    matrices = matrices if matrices is not None else model.assemble_system(config)
    free = _free_partition(matrices)
    f_full = loads.to_vector(config) if isinstance(loads, LoadSet) else np.asarray(loads, float)
    axial_n = model.axial_force(state, config)
    k_ff = _effective_stiffness(matrices, axial_n, free)
    m_ff = matrices.mass[np.ix_(free, free)]
    c_ff = options.damping_alpha * m_ff + options.damping_beta * matrices.k_lin[np.ix_(free, free)]
    rhs = (f_full[free] + _constraint_rhs(matrices, axial_n, free)
           - c_ff @ state.q_dot[free] - k_ff @ state.q[free])
    acc = np.zeros(matrices.n_dof)
    acc[free] = _solve_spd(m_ff, rhs)
    return model.BeamState(state.q.copy(), state.q_dot.copy(), acc, state.t)


@lru_cache(maxsize=8)
def _cached_solver(config, options):
    return TransientSolver(config, options)


def step(state, config, loads, options=None):
    """One Newmark step as a pure function (solver instances are cached)."""
    return _cached_solver(config, options or SolveOptions()).step(state, loads)


def energy(state, config, matrices=None):
    """Total mechanical energy: kinetic + bending strain + membrane term.

    The kinetic term uses the velocity q_dot; the membrane contribution is
    -N/2 * q^T K_geo q, positive in tension under the sign convention of
    ``model.axial_force``. With zero velocity this equals
    q^T (K_lin - N K_geo) q / 2, the strain energy of the effective system.
    """
    matrices = matrices if matrices is not None else model.assemble_system(config)
    axial_n = model.axial_force(state, config)
    kinetic = 0.5 * state.q_dot @ matrices.mass @ state.q_dot
    bending = 0.5 * state.q @ matrices.k_lin @ state.q
    membrane = -0.5 * axial_n * (state.q @ matrices.k_geo @ state.q)
    return float(kinetic + bending + membrane)
