"""Beam discretization for planar bending of slender microstructures.

Defines the configuration types (material, cross-section, boundary condition,
mesh), assembles the consistent mass, bending stiffness and geometric
stiffness matrices, computes the membrane axial force from centroid-line
stretch, and builds the orthonormal director frames that track the deflected
centroid line.

Conventions
-----------
* Strict SI units.
* 2 DOF per node: deflection w (m, global +y) at index 2*i, rotation theta
  (rad, about +z) at 2*i + 1. The beam axis lies along +x.
* The geometric stiffness matrix K_geo is assembled per unit *tension*.
  The effective bending stiffness in use is K_lin - N * K_geo, where
  N = E*A*(L - L')/L is negative in tension (fixed supports stretch the
  centroid line, L' > L), so tension stiffens and compression softens.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from . import kernels
from .errors import InvalidArgumentError, InvalidConfigError, UnsupportedOrderError

# Highest implemented truncation of the frequency-correction series.
MAX_SERIES_ORDER = 2


def _require(condition, message):
    if not condition:
        raise InvalidConfigError(message)


def _finite_positive(value, name):
    _require(isinstance(value, (int, float)) and math.isfinite(value), f"{name} must be finite")
    _require(value > 0.0, f"{name} must be strictly positive")


@dataclass(frozen=True)
class MaterialProperties:
    """Linear-elastic material: Young's modulus (Pa) and density (kg/m^3)."""

    youngs_modulus: float
    density: float

    def __post_init__(self):
        _finite_positive(self.youngs_modulus, "youngs_modulus")
        _finite_positive(self.density, "density")


@dataclass(frozen=True)
class CrossSection:
    """Rectangular cross-section; bending deflection acts across the thickness."""

    width: float
    thickness: float

    def __post_init__(self):
        _finite_positive(self.width, "width")
        _finite_positive(self.thickness, "thickness")

    @property
    def area(self):
        return self.width * self.thickness

    @property
    def second_moment(self):
        return self.width * self.thickness ** 3 / 12.0


def section_properties(width, thickness, min_dimension=0.0):
    """Area and second moment of a rectangular section.

    Dimensions at or below ``min_dimension`` (default: only non-positive
    values) are rejected as degenerate.
    """
    for name, value in (("width", width), ("thickness", thickness)):
        if not math.isfinite(value) or value <= min_dimension:
            raise InvalidConfigError(
                f"{name}={value!r} is degenerate (must exceed {min_dimension})")
    section = CrossSection(width, thickness)
    return section.area, section.second_moment


class BoundaryCondition(enum.Enum):
    CLAMPED_FREE = "clamped_free"        # cantilever
    CLAMPED_CLAMPED = "clamped_clamped"  # microbridge
    FREE_FREE = "free_free"


@dataclass(frozen=True)
class BeamConfig:
    """One microstructure: geometry, material, mesh and boundary condition."""

    length: float
    material: MaterialProperties
    section: CrossSection
    n_elements: int
    boundary: BoundaryCondition

    def __post_init__(self):
        _finite_positive(self.length, "length")
        _require(isinstance(self.n_elements, int) and self.n_elements >= 1,
                 "n_elements must be an integer >= 1")
        _require(isinstance(self.boundary, BoundaryCondition), "boundary must be a BoundaryCondition")

    @property
    def element_length(self):
        return self.length / self.n_elements

    @property
    def n_nodes(self):
        return self.n_elements + 1

    @property
    def n_dof(self):
        return 2 * self.n_nodes

    @property
    def node_positions(self):
        return np.linspace(0.0, self.length, self.n_nodes)

    def constrained_dofs(self):
        """DOF indices pinned to zero by the boundary condition."""
        if self.boundary is BoundaryCondition.CLAMPED_FREE:
            return (0, 1)
        if self.boundary is BoundaryCondition.CLAMPED_CLAMPED:
            last = 2 * self.n_elements
            return (0, 1, last, last + 1)
        return ()


@dataclass
class BeamState:
    """Generalized coordinates q, velocities and accelerations at time t.

    Layout alternates (deflection, rotation) per node; all three vectors have
    length ``config.n_dof``.
    """

    q: np.ndarray
    q_dot: np.ndarray
    q_ddot: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.q_dot = np.asarray(self.q_dot, dtype=float)
        self.q_ddot = np.asarray(self.q_ddot, dtype=float)
        n = self.q.shape[0]
        if self.q_dot.shape != (n,) or self.q_ddot.shape != (n,):
            raise InvalidArgumentError("q, q_dot, q_ddot must have identical length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.q_dot))
                and np.all(np.isfinite(self.q_ddot)) and math.isfinite(self.t)):
            raise InvalidArgumentError("state entries must be finite")

    @classmethod
    def zeros(cls, config):
        n = config.n_dof
        return cls(np.zeros(n), np.zeros(n), np.zeros(n), 0.0)

    def copy(self):
        return BeamState(self.q.copy(), self.q_dot.copy(), self.q_ddot.copy(), self.t)

    def deflections(self):
        return self.q[0::2]

    def rotations(self):
        return self.q[1::2]


# ---------------------------------------------------------------------------
# Shape functions
# ---------------------------------------------------------------------------

# Cubic interpolation shapes on xi in [0, 1]; rotation shapes are expressed
# per unit slope in xi (the element length scale is applied at assembly).
_H_CUBIC = (
    Polynomial([1.0, 0.0, -3.0, 2.0]),   # deflection at left node
    Polynomial([0.0, 1.0, -2.0, 1.0]),   # rotation at left node
    Polynomial([0.0, 0.0, 3.0, -2.0]),   # deflection at right node
    Polynomial([0.0, 0.0, -1.0, 1.0]),   # rotation at right node
)


def _hermite_fit(poly):
    """Cubic with the same end values and end slopes as ``poly``."""
    dp = poly.deriv()
    return (poly(0.0) * _H_CUBIC[0] + dp(0.0) * _H_CUBIC[1]
            + poly(1.0) * _H_CUBIC[2] + dp(1.0) * _H_CUBIC[3])


def _quadruple_integral(poly):
    p = poly
    for _ in range(4):
        p = p.integ()
    return p


@dataclass(frozen=True)
class ShapeFunctionBasis:
    """Element shape functions as a truncated series in the frequency parameter.

    Each of the four DOF shapes is ``sum_j w**j * term[j]`` where term[0] is
    the static cubic and each further term solves the quasi-static recurrence
    term[j+1]'''' = term[j] with zero end values and slopes, so the nodal
    Kronecker property holds at every truncation. The dimensionless parameter
    is w = rho*A*omega^2*h^4 / (E*I) for an element of length h.
    """

    order: int
    terms: tuple = field(repr=False, default=())

    @classmethod
    def build(cls, order):
        if order < 0:
            raise InvalidArgumentError("series order must be >= 0")
        if order > MAX_SERIES_ORDER:
            raise UnsupportedOrderError(
                f"series order {order} above implemented truncation {MAX_SERIES_ORDER}")
        terms = []
        for k in range(4):
            seq = [_H_CUBIC[k]]
            for _ in range(order):
                particular = _quadruple_integral(seq[-1])
                seq.append(particular - _hermite_fit(particular))
            terms.append(tuple(seq))
        return cls(order=order, terms=tuple(terms))

    def polynomial(self, k, w=0.0):
        """Combined polynomial for DOF shape k at series parameter value w."""
        poly = self.terms[k][0]
        scale = 1.0
        for j in range(1, self.order + 1):
            scale *= w
            poly = poly + scale * self.terms[k][j]
        return poly

    def evaluate(self, k, xi, w=0.0, derivative=0):
        poly = self.polynomial(k, w)
        if derivative:
            poly = poly.deriv(derivative)
        return poly(xi)


def shape_basis(order=0):
    """Shape-function basis; order 0 is the static cubic baseline."""
    return ShapeFunctionBasis.build(order)


# ---------------------------------------------------------------------------
# Element matrices
# ---------------------------------------------------------------------------

def element_mass_matrix(density, area, h, basis=None, w=0.0):
    """Consistent element mass matrix (integral of rho*A * N^T N over the element)."""
    if basis is None or (basis.order == 0 and w == 0.0):
        c = density * area * h / 420.0
        return c * np.array([
            [156.0, 22.0 * h, 54.0, -13.0 * h],
            [22.0 * h, 4.0 * h * h, 13.0 * h, -3.0 * h * h],
            [54.0, 13.0 * h, 156.0, -22.0 * h],
            [-13.0 * h, -3.0 * h * h, -22.0 * h, 4.0 * h * h],
        ])
    return density * area * h * _integrate_products(basis, w, h, derivative=0)


def element_stiffness_matrix(youngs_modulus, second_moment, h, basis=None, w=0.0):
    """Element bending stiffness (integral of E*I * N''^T N'')."""
    if basis is None or (basis.order == 0 and w == 0.0):
        c = youngs_modulus * second_moment / h ** 3
        return c * np.array([
            [12.0, 6.0 * h, -12.0, 6.0 * h],
            [6.0 * h, 4.0 * h * h, -6.0 * h, 2.0 * h * h],
            [-12.0, -6.0 * h, 12.0, -6.0 * h],
            [6.0 * h, 2.0 * h * h, -6.0 * h, 4.0 * h * h],
        ])
    return (youngs_modulus * second_moment / h ** 3) * _integrate_products(
        basis, w, h, derivative=2)


def element_geometric_matrix(h, basis=None, w=0.0):
    """Element geometric stiffness per unit tension (integral of N'^T N')."""
    if basis is None or (basis.order == 0 and w == 0.0):
        c = 1.0 / (30.0 * h)
        return c * np.array([
            [36.0, 3.0 * h, -36.0, 3.0 * h],
            [3.0 * h, 4.0 * h * h, -3.0 * h, -h * h],
            [-36.0, -3.0 * h, 36.0, -3.0 * h],
            [3.0 * h, -h * h, -3.0 * h, 4.0 * h * h],
        ])
    return (1.0 / h) * _integrate_products(basis, w, h, derivative=1)


def _integrate_products(basis, w, h, derivative):
    """Gauss-exact integral over xi of (d^m N_i)(d^m N_j), with h scaling.

    Rotation DOFs carry a factor h; each xi-derivative contributes 1/h twice
    relative to the closed-form constants already applied by the callers
    (which include the full h powers), so only the xi-space integral with the
    DOF scaling is computed here.
    """
    degree = 3 + 4 * basis.order
    npts = (2 * degree) // 2 + 1
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    xi = 0.5 * (nodes + 1.0)
    wq = 0.5 * weights
    scale = np.array([1.0, h, 1.0, h])
    values = np.empty((4, xi.size))
    for k in range(4):
        poly = basis.polynomial(k, w).deriv(derivative) if derivative else basis.polynomial(k, w)
        values[k] = poly(xi) * scale[k]
    out = np.einsum("ig,jg,g->ij", values, values, wq)
    return 0.5 * (out + out.T)


# ---------------------------------------------------------------------------
# System assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemMatrices:
    """Assembled full-size matrices plus the constraint bookkeeping.

    ``constraints`` maps DOF index -> prescribed value (0.0 for boundary
    clamping; stuck-node pinning adds entries with the substrate offset).
    Matrices are stored unreduced; solvers work on the free-DOF partition.
    """

    mass: np.ndarray
    k_lin: np.ndarray
    k_geo: np.ndarray
    n_nodes: int
    constraints: tuple  # ((dof, value), ...) sorted by dof

    @property
    def n_dof(self):
        return 2 * self.n_nodes

    @property
    def constrained_dofs(self):
        return np.array([d for d, _ in self.constraints], dtype=int)

    @property
    def free_dofs(self):
        fixed = {d for d, _ in self.constraints}
        return np.array([d for d in range(self.n_dof) if d not in fixed], dtype=int)

    def prescribed_values(self):
        full = np.zeros(self.n_dof)
        for dof, value in self.constraints:
            full[dof] = value
        return full

    def with_constraints(self, extra):
        """New SystemMatrices with additional (dof, value) constraints."""
        merged = dict(self.constraints)
        for dof, value in extra:
            merged.setdefault(dof, value)
        return SystemMatrices(self.mass, self.k_lin, self.k_geo, self.n_nodes,
                              tuple(sorted(merged.items())))


def _scatter(full, block, e):
    dofs = (2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3)
    for i, gi in enumerate(dofs):
        for j, gj in enumerate(dofs):
            full[gi, gj] += block[i, j]


def _assemble(config, block_fn, order, omega_ref):
    basis = shape_basis(order) if order > 0 else None
    h = config.element_length
    w = 0.0
    if order > 0:
        ei = config.material.youngs_modulus * config.section.second_moment
        w = (config.material.density * config.section.area
             * omega_ref ** 2 * h ** 4 / ei)
    full = np.zeros((config.n_dof, config.n_dof))
    block = block_fn(h, basis, w)
    for e in range(config.n_elements):
        _scatter(full, block, e)
    return full


def assemble_mass(config, order=0, omega_ref=0.0):
    """Consistent mass matrix for the whole mesh (full size, constraints separate)."""
    rho, area = config.material.density, config.section.area
    return _assemble(config, lambda h, b, w: element_mass_matrix(rho, area, h, b, w),
                     order, omega_ref)


def assemble_stiffness_linear(config, order=0, omega_ref=0.0):
    """Bending stiffness matrix for the whole mesh."""
    e_mod = config.material.youngs_modulus
    i_sec = config.section.second_moment
    return _assemble(config, lambda h, b, w: element_stiffness_matrix(e_mod, i_sec, h, b, w),
                     order, omega_ref)


def assemble_stiffness_geometric(config, order=0, omega_ref=0.0):
    """Geometric stiffness per unit tension for the whole mesh."""
    return _assemble(config, lambda h, b, w: element_geometric_matrix(h, b, w),
                     order, omega_ref)


def assemble_system(config, order=0, omega_ref=0.0):
    """All three system matrices plus the boundary constraint set."""
    constraints = tuple((dof, 0.0) for dof in config.constrained_dofs())
    return SystemMatrices(
        mass=assemble_mass(config, order, omega_ref),
        k_lin=assemble_stiffness_linear(config, order, omega_ref),
        k_geo=assemble_stiffness_geometric(config, order, omega_ref),
        n_nodes=config.n_nodes,
        constraints=constraints,
    )


# ---------------------------------------------------------------------------
# Axial force and centroid-line geometry
# ---------------------------------------------------------------------------

def axial_force(state, config):
    """Membrane axial force N = E*A*(L - L')/L from centroid-line stretch.

    L' is the arc length of the deflected centroid line. Only a span with
    both ends axially restrained (clamped-clamped) stretches under bending;
    with a free end the line retracts instead, so N = 0 there. Negative N is
    tension, positive compression.
    """
    if config.boundary is not BoundaryCondition.CLAMPED_CLAMPED:
        return 0.0
    stretch = kernels.centroid_stretch(np.ascontiguousarray(state.q, dtype=float),
                                       config.element_length, config.n_elements)
    ea = config.material.youngs_modulus * config.section.area
    return -ea * stretch / config.length


def interpolate_deflection(state, config, s):
    """Deflection and slope of the centroid line at arc position s in [0, L]."""
    if not (0.0 <= s <= config.length * (1.0 + 1e-12)):
        raise InvalidArgumentError(f"position s={s!r} outside [0, {config.length}]")
    s = min(s, config.length)
    return kernels.eval_deflection(np.ascontiguousarray(state.q, dtype=float),
                                   config.element_length, config.n_elements, s)


def consistent_point_load(config, s, force, moment=0.0):
    """Equivalent nodal load vector for a transverse point force (and moment) at s."""
    if not (0.0 <= s <= config.length * (1.0 + 1e-12)):
        raise InvalidArgumentError(f"position s={s!r} outside [0, {config.length}]")
    if not (math.isfinite(force) and math.isfinite(moment)):
        raise InvalidArgumentError("load magnitudes must be finite")
    h = config.element_length
    e = min(int(min(s, config.length) / h), config.n_elements - 1)
    xi = min(s, config.length) / h - e
    f = np.zeros(config.n_dof)
    scale = (1.0, h, 1.0, h)
    for k in range(4):
        value = force * _H_CUBIC[k](xi) * scale[k]
        if moment:
            # conjugate of a moment is the physical slope dN/ds = (1/h) dN/dxi
            value += moment * _H_CUBIC[k].deriv()(xi) * scale[k] / h
        f[2 * e + k] += value
    return f


# ---------------------------------------------------------------------------
# Director frames
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectorFrame:
    """Orthonormal triad at a point of the centroid line.

    d3 is the cross-section normal (unit tangent of the centroid line),
    d1 the out-of-plane director, and the triad satisfies d3 = d1 x d2.
    """

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    origin: np.ndarray

    @classmethod
    def from_tangent_angle(cls, theta, origin=(0.0, 0.0, 0.0)):
        """Planar frame with tangent rotated by theta about +z.

        d1 is pinned to global +z; d2 = d3 x d1 completes the triad so that
        d1 x d2 reproduces d3 exactly.
        """
        c, s = math.cos(theta), math.sin(theta)
        d3 = np.array([c, s, 0.0])
        d1 = np.array([0.0, 0.0, 1.0])
        d2 = np.cross(d3, d1)
        return cls(d1=d1, d2=d2, d3=d3, origin=np.asarray(origin, dtype=float))


def director_array(state, config):
    """Vectorized directors: (n_nodes, 3, 3) array of rows (d1, d2, d3).

    Componentwise identical to DirectorFrame.from_tangent_angle at each node
    (the planar cross products reduce to sign flips of cos/sin, which IEEE
    multiplication by +-1 reproduces exactly).
    """
    thetas = state.q[1::2]
    c = np.cos(thetas)
    s = np.sin(thetas)
    out = np.zeros((config.n_nodes, 3, 3))
    out[:, 0, 2] = 1.0       # d1 = +z
    out[:, 1, 0] = s         # d2 = d3 x d1
    out[:, 1, 1] = -c
    out[:, 2, 0] = c         # d3 = tangent
    out[:, 2, 1] = s
    return out


def directors_from_state(state, config):
    """One DirectorFrame per node, tangent taken from the nodal rotation DOF."""
    xs = config.node_positions
    rows = director_array(state, config)
    frames = []
    for i in range(config.n_nodes):
        origin = np.array([xs[i], state.q[2 * i], 0.0])
        frames.append(DirectorFrame(d1=rows[i, 0], d2=rows[i, 1], d3=rows[i, 2],
                                    origin=origin))
    return frames
