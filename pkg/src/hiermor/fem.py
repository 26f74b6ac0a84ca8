"""Full-order model: 1D advection-diffusion-reaction, P1 elements, implicit Euler.

Reference problem (dimensionless breakthrough setup):

    d_t c - (1/Pe) d_xx c + d_x c + Da c = 0      on (0, 1),
    c(0, t) = inflow value,  d_x c(1, t) = 0,     c(., 0) = c0.

The quantity of interest is the breakthrough curve f(mu; t) = c(1, t),
recorded at the implicit Euler time points t_1 .. t_N.

The inflow node is constrained and eliminated from the algebraic system;
its couplings are folded into the load.  Since those couplings multiply the
parameter-dependent operator terms, the load splits into one component per
affine term and is assembled per parameter by :func:`load_vector`, so that
all stored matrices and vectors stay parameter independent:

    A(mu) = (1/pe) * diff + adv + da * react,
    b(mu) = (1/pe) * load_diff + load_adv + da * load_react.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "ParameterBox",
    "ParameterPoint",
    "MeshSpec",
    "TimeGrid",
    "FomOperators",
    "Trajectory",
    "QoiVector",
    "assemble",
    "solve_fom",
    "qoi_norm",
    "system_matrix",
    "load_vector",
    "theta",
]


@dataclass(frozen=True)
class ParameterPoint:
    """A point mu = (Da, Pe) in parameter space."""

    da: float
    pe: float


@dataclass(frozen=True)
class ParameterBox:
    """Admissible rectangle for (Da, Pe).

    Pe enters the operator as 1/Pe and must be strictly positive; Da may
    start at exactly zero (no reaction) but not below.
    """

    da_min: float = 0.1
    da_max: float = 10.0
    pe_min: float = 1.0
    pe_max: float = 100.0

    def __post_init__(self):
        if not self.da_min < self.da_max:
            raise ValueError("da_min must be < da_max")
        if not self.pe_min < self.pe_max:
            raise ValueError("pe_min must be < pe_max")
        if self.da_min < 0.0:
            raise ValueError("da_min must be >= 0")
        if self.pe_min <= 0.0:
            raise ValueError("pe_min must be > 0")

    def contains(self, mu: ParameterPoint) -> bool:
        return (self.da_min <= mu.da <= self.da_max
                and self.pe_min <= mu.pe <= self.pe_max)

    def corners(self) -> list[ParameterPoint]:
        """The four outermost points of the box."""
        return [
            ParameterPoint(da, pe)
            for da in (self.da_min, self.da_max)
            for pe in (self.pe_min, self.pe_max)
        ]


@dataclass(frozen=True)
class MeshSpec:
    """Uniform mesh of [0, 1] with nodes x_i = i * h, h = 1 / n_cells."""

    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise ValueError("n_cells must be >= 2")

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells


@dataclass(frozen=True)
class TimeGrid:
    """Implicit Euler grid: t_n = n * dt, n = 0 .. n_steps, dt = t_end / n_steps."""

    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if abs(self.dt * self.n_steps - self.t_end) > 1e-12 * self.t_end:
            raise ValueError("dt * n_steps must equal t_end to machine precision")

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        """The QoI time points t_1 .. t_{n_steps} (t = 0 excluded)."""
        return self.dt * np.arange(1, self.n_steps + 1)


@dataclass
class QoiVector:
    """Output time series (f(t_1), .., f(t_N)) with its quadrature weight dt."""

    values: np.ndarray
    dt: float


def qoi_norm(q: QoiVector) -> float:
    """Discrete L2([0, T]) norm, rectangle rule on the implicit Euler grid."""
    return math.sqrt(q.dt * float(np.dot(q.values, q.values)))


@dataclass
class Trajectory:
    """Nodal coefficients per time step; row n is the solution at t_n (row 0 = c0)."""

    coeffs: np.ndarray


@dataclass
class FomOperators:
    """Assembled, parameter-independent FEM blocks on the free nodes 1 .. n_cells.

    All matrices are tridiagonal CSR of size n_dofs = n_cells.  `react` is the
    mass matrix under its affine-term name.  `ip` is the discrete H1 inner
    product mass + diff used for all orthogonality and dual-norm computations.

    Treated as immutable after assembly (solvers for distinct parameters may
    share one instance); the cached factorizations are created lazily on
    first use.
    """

    mass: sp.csr_matrix
    diff: sp.csr_matrix
    adv: sp.csr_matrix
    react: sp.csr_matrix
    load_diff: np.ndarray
    load_adv: np.ndarray
    load_react: np.ndarray
    output: np.ndarray
    ip: sp.csr_matrix
    n_dofs: int
    inflow_value: float
    _ip_lu: object = field(default=None, init=False, repr=False, compare=False)
    _coercivity: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def ip_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ip @ x = rhs (vector or matrix rhs); factorization is cached."""
        if self._ip_lu is None:
            self._ip_lu = spla.splu(self.ip.tocsc())
        return self._ip_lu.solve(rhs)


def theta(mu: ParameterPoint) -> tuple[float, float, float]:
    """Affine coefficients (diffusion, advection, reaction) at mu."""
    return (1.0 / mu.pe, 1.0, mu.da)


def assemble(mesh: MeshSpec, inflow_value: float = 1.0) -> FomOperators:
    """Assemble mass, stiffness, advection and load blocks on the free nodes.

    The inflow node x = 0 carries the Dirichlet value and is eliminated;
    node n_cells (the outflow, x = 1) stays free so the output functional is
    the coordinate selector of the last DOF.
    """
    n = mesh.n_cells
    h = mesh.h
    g = inflow_value

    main_m = np.full(n, 2.0 * h / 3.0)
    main_m[-1] = h / 3.0
    off_m = np.full(n - 1, h / 6.0)
    mass = sp.diags([off_m, main_m, off_m], [-1, 0, 1], format="csr")

    main_k = np.full(n, 2.0 / h)
    main_k[-1] = 1.0 / h
    off_k = np.full(n - 1, -1.0 / h)
    diff = sp.diags([off_k, main_k, off_k], [-1, 0, 1], format="csr")

    main_b = np.zeros(n)
    main_b[-1] = 0.5
    adv = sp.diags(
        [np.full(n - 1, -0.5), main_b, np.full(n - 1, 0.5)], [-1, 0, 1], format="csr"
    )

    # Couplings of the free nodes to the eliminated inflow node, moved to the
    # right-hand side: b_X = -X[free, 0] * g.  Only node 1 is affected.
    load_diff = np.zeros(n)
    load_diff[0] = g / h
    load_adv = np.zeros(n)
    load_adv[0] = g / 2.0
    load_react = np.zeros(n)
    load_react[0] = -g * h / 6.0

    output = np.zeros(n)
    output[-1] = 1.0

    return FomOperators(
        mass=mass,
        diff=diff,
        adv=adv,
        react=mass.copy(),
        load_diff=load_diff,
        load_adv=load_adv,
        load_react=load_react,
        output=output,
        ip=(mass + diff).tocsr(),
        n_dofs=n,
        inflow_value=g,
    )


def system_matrix(ops: FomOperators, mu: ParameterPoint) -> sp.csr_matrix:
    """A(mu) = (1/pe) * diff + adv + da * react."""
    th_d, th_a, th_r = theta(mu)
    return (th_d * ops.diff + th_a * ops.adv + th_r * ops.react).tocsr()


def load_vector(ops: FomOperators, mu: ParameterPoint) -> np.ndarray:
    """b(mu), the eliminated inflow couplings weighted by the affine coefficients."""
    th_d, th_a, th_r = theta(mu)
    return th_d * ops.load_diff + th_a * ops.load_adv + th_r * ops.load_react


def solve_fom(
    ops: FomOperators,
    mu: ParameterPoint,
    grid: TimeGrid,
    c0: np.ndarray,
    source: Callable[[float], np.ndarray] | None = None,
) -> tuple[Trajectory, QoiVector]:
    """March (mass + dt A(mu)) c^n = mass c^{n-1} + dt (b(mu) + source(t_n)).

    The step matrix is factorized once and reused for all n_steps solves.
    `source`, when given, must return an already assembled load vector; it is
    a hook for manufactured-solution studies and is None in production runs.
    """
    if c0.shape != (ops.n_dofs,):
        raise ValueError("c0 has wrong length")
    dt = grid.dt
    step_matrix = (ops.mass + dt * system_matrix(ops, mu)).tocsc()
    lu = spla.splu(step_matrix)
    b = load_vector(ops, mu)

    coeffs = np.empty((grid.n_steps + 1, ops.n_dofs))
    coeffs[0] = c0
    values = np.empty(grid.n_steps)
    c = c0.copy()
    for k, t in enumerate(grid.times()):
        rhs = ops.mass @ c + dt * b
        if source is not None:
            rhs += dt * source(t)
        c = lu.solve(rhs)
        coeffs[k + 1] = c
        values[k] = float(ops.output @ c)
    return Trajectory(coeffs), QoiVector(values, dt)
