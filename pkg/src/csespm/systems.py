"""Discretized state-space systems for solid and electrolyte diffusion.

All builders return affine systems dx/dt = A x + B I (+ G).  Finite
volume assemblies balance face fluxes over spherical control volumes, so
volume-weighted row sums vanish except where a physical boundary flux
enters through B or G; that is what makes the scheme conservative.

Two-phase positive electrode: the shell spans [r_p, R_s_p] with N_r equal
width CVs (width recomputed from r_p), a Dirichlet interface value g(I) at
the inner face and the applied current flux at the outer face.  The extra
state r_p obeys the front ODE
    dr_p/dt = sign(I) * D_s_p / (c_alpha - c_beta) * dc/dr|_{r_p}
with the gradient taken one-sided over the half cell next to the interface.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, PhaseDomainError
from .params import CellParameters

log = logging.getLogger(__name__)

# with I > 0 on discharge, lithium enters the positive particle and leaves
# the negative particle
FLUX_SIGN = {"pos": +1.0, "neg": -1.0}


@dataclass(frozen=True)
class AffineSystem:
    """Matrices of dx/dt = A x + B I + G (G optional)."""

    A: np.ndarray
    B: np.ndarray
    G: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def rhs(self, x: np.ndarray, current: float) -> np.ndarray:
        out = self.A @ x + self.B * current
        if self.G is not None:
            out = out + self.G
        return out

    def validate(self):
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape != (n,):
            raise ParameterError("A must be square and B a matching vector")
        if self.G is not None and self.G.shape != (n,):
            raise ParameterError("G must match the state dimension")
        if not (np.isfinite(self.A).all() and np.isfinite(self.B).all()
                and (self.G is None or np.isfinite(self.G).all())):
            raise ParameterError("system matrices contain non-finite entries")


_UNIT_FACES: dict[int, np.ndarray] = {}


def unit_faces(n: int) -> np.ndarray:
    f = _UNIT_FACES.get(n)
    if f is None:
        f = _UNIT_FACES[n] = np.linspace(0.0, 1.0, n + 1)
    return f


def spherical_cells(r_inner: float, r_outer: float, n: int):
    """Faces, face areas and CV volumes of n equal-width spherical shells."""
    faces = r_inner + (r_outer - r_inner) * unit_faces(n)
    areas = 4.0 * np.pi * faces * faces
    f3 = faces * faces * faces
    volumes = (4.0 / 3.0) * np.pi * (f3[1:] - f3[:-1])
    return faces, areas, volumes


_VOLUME_CACHE: dict[tuple[float, int], np.ndarray] = {}


def cell_volumes(R: float, n: int, r_inner: float = 0.0) -> np.ndarray:
    if r_inner == 0.0:
        v = _VOLUME_CACHE.get((R, n))
        if v is None:
            if len(_VOLUME_CACHE) > 256:
                _VOLUME_CACHE.clear()
            v = _VOLUME_CACHE[(R, n)] = spherical_cells(0.0, R, n)[2]
        return v
    return spherical_cells(r_inner, R, n)[2]


def molar_flux_density(params: CellParameters, electrode: str, current: float) -> float:
    """Surface molar influx density [mol/(m^2 s)], positive into the particle."""
    s = FLUX_SIGN[electrode]
    return s * current / (params.F * params.A_cell * params.L(electrode) * params.a_s(electrode))


def build_one_phase_solid_system(params: CellParameters, electrode: str,
                                 N_r: int) -> AffineSystem:
    """Fixed-grid FVM diffusion in a spherical particle.

    Zero flux at the center (the r = 0 face has zero area) and the applied
    current flux at the surface, entering through B only.  Interior rows of
    A sum to zero.
    """
    if electrode not in FLUX_SIGN:
        raise ParameterError(f"unknown electrode {electrode!r}")
    if N_r < 2:
        raise ParameterError("N_r must be >= 2")
    R = params.R_s(electrode)
    D = params.D_s(electrode)
    dr = R / N_r
    _, areas, volumes = spherical_cells(0.0, R, N_r)

    A = np.zeros((N_r, N_r))
    for i in range(N_r):
        if i > 0:
            w = D * areas[i] / (dr * volumes[i])
            A[i, i - 1] += w
            A[i, i] -= w
        if i < N_r - 1:
            w = D * areas[i + 1] / (dr * volumes[i])
            A[i, i + 1] += w
            A[i, i] -= w
    B = np.zeros(N_r)
    B[N_r - 1] = FLUX_SIGN[electrode] * areas[N_r] / (
        volumes[N_r - 1] * params.F * params.A_cell * params.L(electrode) * params.a_s(electrode))
    return AffineSystem(A, B)


def interface_concentration(params: CellParameters, current: float,
                            direction: str) -> float:
    """Interface value g(I): c_beta for I > 0, c_alpha for I < 0, 0 at rest."""
    if current > 0.0:
        return params.c_beta(direction)
    if current < 0.0:
        return params.c_alpha(direction)
    return 0.0


def direction_for_current(current: float, fallback: str = "dis") -> str:
    if current > 0.0:
        return "dis"
    if current < 0.0:
        return "ch"
    return fallback


def build_two_phase_system(params: CellParameters, r_p: float, current: float,
                           N_r: int, direction: str | None = None) -> AffineSystem:
    """Shell FVM diffusion plus the moving-boundary ODE, state [c_1..c_N, r_p].

    The interface Dirichlet value g(I) enters through G; at I = 0 the g(I)=0
    branch is realized as a zero-flux interface (no conversion) and a frozen
    front, so a uniform shell stays uniform and dr_p/dt = 0.
    """
    R = params.R_s_p
    if not 0.0 < r_p < R:
        raise PhaseDomainError(f"r_p={r_p!r} outside (0, R_s_p); transition regimes first")
    if N_r < 2:
        raise ParameterError("N_r must be >= 2")
    if direction is None:
        direction = direction_for_current(current)
    D = params.D_s_p
    dr = (R - r_p) / N_r
    _, areas, volumes = spherical_cells(r_p, R, N_r)
    g = interface_concentration(params, current, direction)
    dc = params.c_alpha(direction) - params.c_beta(direction)
    sgn = float(np.sign(current))

    n = N_r + 1
    A = np.zeros((n, n))
    B = np.zeros(n)
    G = np.zeros(n)
    for i in range(N_r):
        if i > 0:
            w = D * areas[i] / (dr * volumes[i])
            A[i, i - 1] += w
            A[i, i] -= w
        elif current != 0.0:
            # Dirichlet value g at the inner face, one-sided over a half cell
            w = 2.0 * D * areas[0] / (dr * volumes[0])
            A[i, i] -= w
            G[i] += w * g
        if i < N_r - 1:
            w = D * areas[i + 1] / (dr * volumes[i])
            A[i, i + 1] += w
            A[i, i] -= w
    B[N_r - 1] = areas[N_r] / (
        volumes[N_r - 1] * params.F * params.A_cell * params.L_p * params.a_s("pos"))

    # front row: dr_p/dt = sign(I) D / (c_alpha - c_beta) * 2 (c_1 - g) / dr
    A[N_r, 0] = 2.0 * sgn * D / (dr * dc)
    G[N_r] = -2.0 * sgn * D * g / (dr * dc)
    return AffineSystem(A, B, G)


def build_electrolyte_system(params: CellParameters, N_e: int,
                             split: tuple[int, int, int] | None = None) -> AffineSystem:
    """FVM electrolyte diffusion across anode/separator/cathode.

    Effective diffusivity D_e * eps^brugg per region, series (harmonic mean)
    face conductances at region interfaces, zero flux at both cell ends, and
    a uniform volumetric source +-(1 - t_plus) I / (F A L eps_e) in the two
    electrode regions.
    """
    if split is None:
        if N_e < 3 or N_e % 3 != 0:
            raise ParameterError("N_e must be >= 3 and divisible by 3 without an explicit split")
        split = (N_e // 3, N_e // 3, N_e // 3)
    if len(split) != 3 or any(n < 1 for n in split) or sum(split) != N_e:
        raise ParameterError("electrolyte split must be three counts >= 1 summing to N_e")

    lengths = (params.L_n, params.L_s, params.L_p)
    porosity = (params.eps_e_n, params.eps_e_s, params.eps_e_p)
    deff = [params.D_e * e**params.brugg for e in porosity]

    dx, eps_i, d_i, region = [], [], [], []
    for r in range(3):
        dx += [lengths[r] / split[r]] * split[r]
        eps_i += [porosity[r]] * split[r]
        d_i += [deff[r]] * split[r]
        region += [r] * split[r]
    dx = np.asarray(dx)
    eps_i = np.asarray(eps_i)
    d_i = np.asarray(d_i)

    A = np.zeros((N_e, N_e))
    for i in range(N_e - 1):
        # series resistance of the two half cells meeting at the face
        cond = 1.0 / (0.5 * dx[i] / d_i[i] + 0.5 * dx[i + 1] / d_i[i + 1])
        A[i, i] -= cond / (eps_i[i] * dx[i])
        A[i, i + 1] += cond / (eps_i[i] * dx[i])
        A[i + 1, i + 1] -= cond / (eps_i[i + 1] * dx[i + 1])
        A[i + 1, i] += cond / (eps_i[i + 1] * dx[i + 1])

    B = np.zeros(N_e)
    src = (1.0 - params.t_plus) / (params.F * params.A_cell)
    for i in range(N_e):
        if region[i] == 0:
            B[i] = src / (params.L_n * eps_i[i])
        elif region[i] == 2:
            B[i] = -src / (params.L_p * eps_i[i])
    return AffineSystem(A, B)


def electrolyte_geometry(params: CellParameters, N_e: int,
                         split: tuple[int, int, int] | None = None):
    """Per-CV width, porosity and region index (0=anode, 1=sep, 2=cathode)."""
    if split is None:
        split = (N_e // 3, N_e // 3, N_e // 3)
    lengths = (params.L_n, params.L_s, params.L_p)
    porosity = (params.eps_e_n, params.eps_e_s, params.eps_e_p)
    dx, eps_i, region = [], [], []
    for r in range(3):
        dx += [lengths[r] / split[r]] * split[r]
        eps_i += [porosity[r]] * split[r]
        region += [r] * split[r]
    return np.asarray(dx), np.asarray(eps_i), np.asarray(region)


# --- concentration reconstructions -----------------------------------------

def surface_concentration(c_bar: np.ndarray, current: float,
                          params: CellParameters, electrode: str,
                          dr: float) -> float:
    """Surface value from the outermost CV average plus the half-cell
    extrapolation along the flux boundary gradient.  Clamped to
    [0, c_s_max] with a logged warning when the clamp activates."""
    D = params.D_s(electrode)
    grad = molar_flux_density(params, electrode, current) / D
    c = float(c_bar[-1]) + 0.5 * dr * grad
    cmax = params.c_s_max(electrode)
    if c < 0.0 or c > cmax:
        log.warning("surface concentration clamped (%s electrode): %.6g", electrode, c)
        c = min(max(c, 0.0), cmax)
    return c


def one_phase_bulk(c_bar: np.ndarray, R: float) -> float:
    """Volume-weighted particle average on the fixed grid."""
    v = cell_volumes(R, len(c_bar))
    return float(np.dot(v, c_bar) / v.sum())


def two_phase_bulk(c_shell: np.ndarray, r_p: float, core_conc: float,
                   R: float) -> float:
    """Particle average: uniform core plus shell CV averages."""
    v_core = (4.0 / 3.0) * np.pi * r_p**3
    v = cell_volumes(R, len(c_shell), r_inner=r_p)
    total = v_core * core_conc + float(np.dot(v, c_shell))
    return total / ((4.0 / 3.0) * np.pi * R**3)


def solid_moles(c_bar: np.ndarray, R: float, r_p: float = 0.0,
                core_conc: float = 0.0) -> float:
    """Total lithium in a particle state [mol per particle volume basis]."""
    if r_p > 0.0:
        v = cell_volumes(R, len(c_bar), r_inner=r_p)
        return float(np.dot(v, c_bar)) + (4.0 / 3.0) * np.pi * r_p**3 * core_conc
    v = cell_volumes(R, len(c_bar))
    return float(np.dot(v, c_bar))


# --- finite difference reference scheme -------------------------------------

def build_fdm_one_phase(params: CellParameters, electrode: str,
                        N_r: int) -> AffineSystem:
    """Central-difference FDM of c_t = D (c_rr + 2/r c_r) on N_r nodes.

    Nodes sit at the same cell-center positions as the FVM averages, so
    state vectors are interchangeable between the schemes.  Ghost nodes
    carry the symmetry condition at the center and the applied current
    flux at the surface.  Node values are collocated, so the scheme does
    not telescope and mass is not conserved exactly.
    """
    if N_r < 2:
        raise ParameterError("N_r must be >= 2")
    R = params.R_s(electrode)
    D = params.D_s(electrode)
    h = R / N_r
    r = (np.arange(N_r) + 0.5) * h
    A = np.zeros((N_r, N_r))
    B = np.zeros(N_r)
    grad_per_amp = FLUX_SIGN[electrode] / (
        D * params.F * params.A_cell * params.L(electrode) * params.a_s(electrode))
    for i in range(N_r):
        lap_lo = D / h**2 - D / (r[i] * h)
        lap_hi = D / h**2 + D / (r[i] * h)
        A[i, i] += -2.0 * D / h**2
        if i == 0:
            # symmetry ghost below the center: c_{-1} = c_0
            A[i, i] += lap_lo
        else:
            A[i, i - 1] += lap_lo
        if i == N_r - 1:
            # flux ghost: c_{N} = c_{N-1} + h dc/dr|_R
            A[i, i] += lap_hi
            B[i] += lap_hi * h * grad_per_amp
        else:
            A[i, i + 1] += lap_hi
    return AffineSystem(A, B)


def build_fdm_two_phase(params: CellParameters, r_p: float, current: float,
                        N_r: int, direction: str | None = None) -> AffineSystem:
    """FDM counterpart of the two-phase system on shell cell-center nodes.

    The ghost node below the interface realizes the Dirichlet value g(I)
    (zero flux at rest), the surface ghost carries the applied current, and
    the front row uses the same one-sided half-cell gradient as the FVM.
    """
    R = params.R_s_p
    if not 0.0 < r_p < R:
        raise PhaseDomainError(f"r_p={r_p!r} outside (0, R_s_p)")
    if direction is None:
        direction = direction_for_current(current)
    D = params.D_s_p
    h = (R - r_p) / N_r
    r = r_p + (np.arange(N_r) + 0.5) * h
    g = interface_concentration(params, current, direction)
    dc = params.c_alpha(direction) - params.c_beta(direction)
    sgn = float(np.sign(current))

    n = N_r + 1
    A = np.zeros((n, n))
    B = np.zeros(n)
    G = np.zeros(n)
    grad_per_amp = 1.0 / (
        D * params.F * params.A_cell * params.L_p * params.a_s("pos"))
    for i in range(N_r):
        lap_lo = D / h**2 - D / (r[i] * h)
        lap_hi = D / h**2 + D / (r[i] * h)
        A[i, i] += -2.0 * D / h**2
        if i == 0:
            if current != 0.0:
                # Dirichlet ghost: c_{-1} = 2 g - c_0
                A[i, i] -= lap_lo
                G[i] += 2.0 * lap_lo * g
            else:
                A[i, i] += lap_lo   # rest: zero-flux interface
        else:
            A[i, i - 1] += lap_lo
        if i == N_r - 1:
            A[i, i] += lap_hi
            B[i] += lap_hi * h * grad_per_amp
        else:
            A[i, i + 1] += lap_hi
    A[N_r, 0] = 2.0 * sgn * D / (h * dc)
    G[N_r] = -2.0 * sgn * D * g / (h * dc)
    return AffineSystem(A, B, G)


def build_solid_system(params: CellParameters, electrode: str, N_r: int,
                       scheme: str = "fvm") -> AffineSystem:
    if scheme == "fvm":
        return build_one_phase_solid_system(params, electrode, N_r)
    if scheme == "fdm":
        return build_fdm_one_phase(params, electrode, N_r)
    raise ParameterError(f"unknown scheme {scheme!r}")


def build_shell_system(params: CellParameters, r_p: float, current: float,
                       N_r: int, scheme: str = "fvm",
                       direction: str | None = None) -> AffineSystem:
    if scheme == "fvm":
        return build_two_phase_system(params, r_p, current, N_r, direction)
    if scheme == "fdm":
        return build_fdm_two_phase(params, r_p, current, N_r, direction)
    raise ParameterError(f"unknown scheme {scheme!r}")
