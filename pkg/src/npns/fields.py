"""Grids, field containers, boundary geometry and physical parameters.

Grid layout (MAC staggering) on the rectangle [0, lx] x [0, ly]:

    scalars (c_i, phi, p, rho)  at cell centers   ((i+0.5)*hx, (j+0.5)*hy), shape (nx, ny)
    u (x-velocity)              at vertical faces (i*hx, (j+0.5)*hy),       shape (nx+1, ny)
    v (y-velocity)              at horizontal faces ((i+0.5)*hx, j*hy),     shape (nx, ny+1)

Index convention: axis 0 is x, axis 1 is y, so f[i, j] sits at (x_i, y_j).
Boundary data (the potential trace, selective concentration values) is
sampled at boundary-face centers: nx samples along bottom/top, ny along
left/right.  Cell-centered Dirichlet conditions are imposed through the
half-cell ghost closure (ghost = 2*w - interior), which keeps the boundary
face value exact.

Fields are value objects: operations never mutate their inputs and may be
called concurrently on distinct data.  Reductions use numpy's fixed
left-to-right pairwise order, so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linsolve
from .errors import OverflowGuardError, ShapeError

# Exponentials of z*phi larger than this abort instead of saturating;
# clamping would silently corrupt the entropy/energy diagnostics.
EXP_ARG_MAX = 60.0

EDGES = ("bottom", "top", "left", "right")


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell grid on [0, lx] x [0, ly]."""

    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4, got {self.nx} x {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("domain lengths must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        return self.lx * self.ly

    def cell_x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.hx

    def cell_y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.hy

    def cell_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.cell_x(), self.cell_y(), indexing="ij")

    def edge_length(self, edge: str) -> float:
        if edge in ("bottom", "top"):
            return self.lx
        if edge in ("left", "right"):
            return self.ly
        raise ValueError(f"unknown edge {edge!r}")

    def edge_faces(self, edge: str) -> int:
        """Number of boundary faces along an edge."""
        return self.nx if edge in ("bottom", "top") else self.ny

    def edge_coords(self, edge: str) -> np.ndarray:
        """Arc-length coordinates of boundary-face centers along an edge."""
        h = self.hx if edge in ("bottom", "top") else self.hy
        return (np.arange(self.edge_faces(edge)) + 0.5) * h


def _as_values(grid: Grid2D, values, shape) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != shape:
        raise ShapeError(f"expected array of shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite entries")
    return arr


@dataclass
class ScalarField:
    """One real value per cell center."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_values(self.grid, self.values, self.grid.shape)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid2D, f: Callable) -> "ScalarField":
        x, y = grid.cell_mesh()
        return cls(grid, np.asarray(f(x, y), dtype=float) + np.zeros(grid.shape))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def integral(self) -> float:
        return float(np.sum(self.values)) * self.grid.cell_area


@dataclass
class VectorField:
    """Staggered velocity: u on vertical faces, v on horizontal faces."""

    grid: Grid2D
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        g = self.grid
        self.u = _as_values(g, self.u, (g.nx + 1, g.ny))
        self.v = _as_values(g, self.v, (g.nx, g.ny + 1))

    @classmethod
    def zeros(cls, grid: Grid2D) -> "VectorField":
        return cls(grid, np.zeros((grid.nx + 1, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def copy(self) -> "VectorField":
        return VectorField(self.grid, self.u.copy(), self.v.copy())

    def divergence(self) -> np.ndarray:
        """Discrete divergence per cell: exact dual of the staggered gradient."""
        g = self.grid
        return (self.u[1:, :] - self.u[:-1, :]) / g.hx + (self.v[:, 1:] - self.v[:, :-1]) / g.hy

    def max_speed(self) -> float:
        mu = float(np.max(np.abs(self.u))) if self.u.size else 0.0
        mv = float(np.max(np.abs(self.v))) if self.v.size else 0.0
        return max(mu, mv)


@dataclass(frozen=True)
class PhysicalParams:
    """Dielectric coefficient, kinematic viscosity and thermal energy factor."""

    eps: float
    nu: float
    kbt: float

    def __post_init__(self):
        for name in ("eps", "nu", "kbt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class BoundarySegment:
    """A portion of one rectangle edge, in arc-length coordinates.

    Segment endpoints snap to face boundaries; a segment shorter than one
    face is rejected rather than given an ambiguous partial-face condition.
    """

    edge: str
    start: float
    end: float

    def __post_init__(self):
        if self.edge not in EDGES:
            raise ValueError(f"unknown edge {self.edge!r}")
        if not (0 <= self.start < self.end):
            raise ValueError("segment needs 0 <= start < end")

    def snapped(self, grid: Grid2D) -> tuple[int, int]:
        """Face index range [i0, i1) covered by the segment after snapping."""
        length = grid.edge_length(self.edge)
        if self.end > length + 1e-12:
            raise ValueError(
                f"segment [{self.start}, {self.end}] exceeds {self.edge} edge length {length}"
            )
        h = length / grid.edge_faces(self.edge)
        i0 = int(round(self.start / h))
        i1 = int(round(self.end / h))
        i1 = min(i1, grid.edge_faces(self.edge))
        if i1 - i0 < 1:
            raise ValueError(
                f"segment [{self.start}, {self.end}] on {self.edge} spans less than one face"
            )
        return i0, i1

    def face_mask(self, grid: Grid2D) -> np.ndarray:
        mask = np.zeros(grid.edge_faces(self.edge), dtype=bool)
        i0, i1 = self.snapped(grid)
        mask[i0:i1] = True
        return mask


@dataclass(frozen=True)
class IonSpecies:
    """Valence, diffusivity and boundary regime of one ionic species.

    regime 'blocking': zero normal flux on the whole boundary.
    regime 'selective': concentration pinned to gamma on the segments,
    zero normal flux elsewhere.
    """

    z: float
    d: float
    regime: str = "blocking"
    gamma: float | None = None
    segments: tuple[BoundarySegment, ...] = ()

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("diffusivity must be positive")
        if self.regime not in ("blocking", "selective"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.regime == "selective":
            if self.gamma is None or not self.gamma > 0:
                raise ValueError("selective species needs gamma > 0")
            if not self.segments:
                raise ValueError("selective species needs at least one boundary segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    def dirichlet_masks(self, grid: Grid2D) -> dict[str, np.ndarray]:
        """Per-edge boolean masks of faces where this species is pinned."""
        masks = {e: np.zeros(grid.edge_faces(e), dtype=bool) for e in EDGES}
        if self.regime == "selective":
            for seg in self.segments:
                masks[seg.edge] |= seg.face_mask(grid)
        return masks


@dataclass
class BoundarySpec:
    """Potential trace W sampled at boundary-face centers of each edge."""

    grid: Grid2D
    bottom: np.ndarray
    top: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        g = self.grid
        for edge in EDGES:
            arr = np.asarray(getattr(self, edge), dtype=float)
            if arr.shape != (g.edge_faces(edge),):
                raise ShapeError(f"{edge} trace must have {g.edge_faces(edge)} samples")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{edge} trace contains non-finite samples")
            setattr(self, edge, arr)

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "BoundarySpec":
        return cls.from_edges(grid, bottom=value, top=value, left=value, right=value)

    @classmethod
    def from_edges(cls, grid: Grid2D, bottom=0.0, top=0.0, left=0.0, right=0.0) -> "BoundarySpec":
        def expand(edge, val):
            n = grid.edge_faces(edge)
            if callable(val):
                s = grid.edge_coords(edge)
                if edge in ("bottom", "top"):
                    x, y = s, np.full(n, 0.0 if edge == "bottom" else grid.ly)
                else:
                    x, y = np.full(n, 0.0 if edge == "left" else grid.lx), s
                return np.asarray(val(x, y), dtype=float) + np.zeros(n)
            return np.asarray(val, dtype=float) + np.zeros(n)

        return cls(grid, expand("bottom", bottom), expand("top", top),
                   expand("left", left), expand("right", right))

    @classmethod
    def from_function(cls, grid: Grid2D, f: Callable) -> "BoundarySpec":
        return cls.from_edges(grid, bottom=f, top=f, left=f, right=f)

    def values(self, edge: str) -> np.ndarray:
        return getattr(self, edge)

    def edge_arrays(self) -> dict[str, np.ndarray]:
        return {e: self.values(e) for e in EDGES}

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(self.values(e)))) for e in EDGES)

    def constant_on(self, segment: BoundarySegment, tol: float = 1e-12) -> bool:
        vals = self.values(segment.edge)[segment.face_mask(self.grid)]
        return float(vals.max() - vals.min()) <= tol * (1.0 + float(np.max(np.abs(vals))))

    def segment_value(self, segment: BoundarySegment) -> float:
        vals = self.values(segment.edge)[segment.face_mask(self.grid)]
        return float(vals.mean())


@dataclass
class SimulationState:
    """Concentrations, potential, velocity, pressure and time.

    Concentrations are expected nonnegative; this is verified by
    transport.check_positivity rather than enforced by clamping.
    phi is kept consistent with c through a same-step Poisson solve.
    """

    c: list[ScalarField]
    phi: ScalarField
    velocity: VectorField
    pressure: ScalarField
    t: float = 0.0

    def __post_init__(self):
        grid = self.phi.grid
        for f in list(self.c) + [self.pressure]:
            if f.grid != grid:
                raise ShapeError("state fields live on different grids")
        if self.velocity.grid != grid:
            raise ShapeError("velocity grid differs from scalar grid")
        self.c = list(self.c)

    @property
    def grid(self) -> Grid2D:
        return self.phi.grid

    def copy(self) -> "SimulationState":
        return SimulationState([f.copy() for f in self.c], self.phi.copy(),
                               self.velocity.copy(), self.pressure.copy(), self.t)


def _check_same_grid(fields: Sequence[ScalarField]):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ShapeError("fields live on different grids")
    return grid


def compute_charge_density(c: Sequence[ScalarField], species: Sequence[IonSpecies]) -> ScalarField:
    """Pointwise charge density rho = sum_i z_i c_i."""
    if len(c) != len(species):
        raise ShapeError(f"{len(c)} concentration fields for {len(species)} species")
    grid = _check_same_grid(c)
    rho = np.zeros(grid.shape)
    for ci, sp in zip(c, species):
        rho += sp.z * ci.values
    return ScalarField(grid, rho)


def guarded_exp(arg: np.ndarray, limit: float = EXP_ARG_MAX) -> np.ndarray:
    """exp(arg) with a hard overflow guard instead of saturation."""
    max_arg = float(np.max(np.abs(arg))) if arg.size else 0.0
    if max_arg > limit:
        raise OverflowGuardError(max_arg, limit)
    return np.exp(arg)


def compute_tilde_c(c_i: ScalarField, phi: ScalarField, z_i: float) -> ScalarField:
    """Auxiliary field c_i * e^(z_i * phi); constant at a Boltzmann state."""
    _check_same_grid([c_i, phi])
    return ScalarField(c_i.grid, c_i.values * guarded_exp(z_i * phi.values))


def harmonic_extension(w: BoundarySpec, grid: Grid2D, eps: float = 1.0) -> ScalarField:
    """Discrete harmonic function on the grid matching w on the whole boundary.

    Satisfies the discrete maximum principle: the extension attains its
    extrema on the boundary.
    """
    if w.grid != grid:
        raise ShapeError("boundary spec was sampled on a different grid")
    if not eps > 0:
        raise ValueError("eps must be positive")
    values = linsolve.solve_cell_dirichlet(
        grid.nx, grid.ny, grid.hx, grid.hy, eps,
        rhs=np.zeros(grid.shape), w_edges=w.edge_arrays())
    return ScalarField(grid, values)
