"""Pseudo-spectral integration of the 2D Euler equation in vorticity form.

    d/dt omega + {psi, omega} = 0,    laplacian(psi) = omega,

with the canonical bracket ``{f, g} = f_x g_y - f_y g_x`` evaluated in
physical space and 2/3-dealiased.  Velocity is ``(u, v) = (-psi_y, psi_x)``.
Time stepping is classical RK4; additional complex "passenger" fields can
be carried through the same RK4 stages, each transported by
``d/dt p + {psi, p} = 0`` with the stage-consistent stream function.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .spectral import (
    FourierField,
    GridSpec,
    check_same_grid,
    sobolev_norm,
    solve_poisson,
    to_physical,
    seeded_smooth_field,
    to_spectral,
)

ENSTROPHY_CEILING = 1e6
INITIAL_CONDITIONS = ("shear", "cellular", "random_smooth")


@dataclass(frozen=True)
class NamedInitialCondition:
    """Name plus parameters of an initial condition (2D or 3D library)."""

    name: str
    amplitude: float = 1.0
    seed: int = 0
    decay: float = 2.0

    def __post_init__(self):
        if self.decay <= 0:
            raise ConfigurationError("decay must be positive")


def initial_vorticity(ic, grid):
    """Vorticity field of a named initial condition.

    ``shear`` is ``A cos y``, ``cellular`` is ``A (cos x + cos y)``.
    ``random_smooth`` is :func:`seeded_smooth_field` rescaled to rms vorticity ``A``.
    """
    if grid.dim != 2:
        raise ConfigurationError("2D initial conditions need a 2D grid")
    if ic.name not in INITIAL_CONDITIONS:
        raise ConfigurationError(
            f"unknown 2D initial condition {ic.name!r}; expected one of {INITIAL_CONDITIONS}"
        )
    x, y = grid.coordinates()
    if ic.name == "shear":
        values = ic.amplitude * np.cos(y) + 0.0 * x
        return FourierField.from_physical(grid, values, real=True)
    if ic.name == "cellular":
        return FourierField.from_physical(grid, ic.amplitude * (np.cos(x) + np.cos(y)), real=True)
    omega = seeded_smooth_field(grid, 1, ic.seed, ic.decay)
    return omega * (ic.amplitude / sobolev_norm(omega, 0))


@dataclass(frozen=True)
class FlowState2D:
    """Vorticity at time ``t`` with its cached stream function."""

    t: float
    omega: FourierField
    psi: FourierField = field(repr=False)

    @classmethod
    def from_vorticity(cls, omega, t=0.0):
        if omega.grid.dim != 2 or not omega.is_scalar:
            raise ValueError("2D flow states need a scalar vorticity on a 2D grid")
        coeffs = omega.coeffs.copy()
        coeffs[0, 0, 0] = 0.0
        omega = omega.replace(coeffs)
        return cls(float(t), omega, solve_poisson(omega))

    @property
    def grid(self):
        return self.omega.grid

    def velocity(self):
        ik = self.grid.ik()
        c = self.psi.coeffs[0]
        return self.psi.replace(np.stack([-ik[1] * c, ik[0] * c]))


def energy(state):
    """``||grad psi||_0^2``."""
    return float(np.sum(state.grid.k_squared() * np.abs(state.psi.coeffs) ** 2))


def enstrophy(state):
    return sobolev_norm(state.omega, 0) ** 2


# -- bracket kernels ----------------------------------------------------------

def _bracket_coeffs(grid, f, g, real):
    """Dealiased ``{f, g}`` for coefficient arrays ``f`` (n, n) and ``g`` (..., n, n)."""
    ikx, iky = grid.ik()
    g = np.asarray(g)
    lead = g.shape[:-2]
    stack = np.concatenate(
        [np.stack([ikx * f, iky * f]), (ikx * g).reshape((-1,) + grid.shape), (iky * g).reshape((-1,) + grid.shape)]
    )
    phys = to_physical(stack, 2)
    m = int(np.prod(lead, dtype=int))
    fx, fy = phys[0], phys[1]
    gx, gy = phys[2 : 2 + m], phys[2 + m :]
    prod = fx * gy - fy * gx
    if real:
        prod = prod.real
    out = to_spectral(prod, 2) * grid.dealias_mask()
    return out.reshape(lead + grid.shape)


def poisson_bracket(f, g):
    """``{f, g} = f_x g_y - f_y g_x``, products in physical space, 2/3-dealiased."""
    grid = check_same_grid(f, g)
    if grid.dim != 2 or not (f.is_scalar and g.is_scalar):
        raise ValueError("poisson_bracket takes two scalar fields on a 2D grid")
    real = f.real and g.real
    return FourierField(grid, _bracket_coeffs(grid, f.coeffs[0], g.coeffs[0], real)[None], real)


def rhs_euler2d(state):
    """Time derivative ``-{psi, omega}`` of the vorticity."""
    return -poisson_bracket(state.psi, state.omega)


# -- RK4 on the coupled (omega, passengers) system ------------------------------

def _inverse_laplacian(grid):
    k2 = grid.k_squared()
    inv = np.zeros_like(k2)
    np.divide(-1.0, k2, out=inv, where=k2 > 0)
    return inv * grid.keep_mask()


def coupled_rhs(grid, omega, passengers):
    """Derivatives of vorticity (n, n) and passengers (p, n, n) coefficient arrays.

    Returns ``(domega, dpassengers, psi)`` so callers can reuse the stage
    stream function.
    """
    psi = omega * _inverse_laplacian(grid)
    ikx, iky = grid.ik()
    p = passengers.shape[0]
    fields = np.concatenate([omega[None], passengers])
    stack = np.concatenate([np.stack([ikx * psi, iky * psi]), ikx * fields, iky * fields])
    phys = to_physical(stack, 2)
    psi_x, psi_y = phys[0], phys[1]
    gx, gy = phys[2 : 3 + p], phys[3 + p :]
    prod = psi_x * gy - psi_y * gx
    prod[0] = prod[0].real
    out = -to_spectral(prod, 2) * grid.dealias_mask()
    return out[0], out[1:], psi


def rk4_coupled(grid, omega, passengers, dt):
    """One RK4 step of the coupled system; returns new arrays and the four stage psis."""
    k1, l1, psi1 = coupled_rhs(grid, omega, passengers)
    k2, l2, psi2 = coupled_rhs(grid, omega + 0.5 * dt * k1, passengers + 0.5 * dt * l1)
    k3, l3, psi3 = coupled_rhs(grid, omega + 0.5 * dt * k2, passengers + 0.5 * dt * l2)
    k4, l4, psi4 = coupled_rhs(grid, omega + dt * k3, passengers + dt * l3)
    omega_new = omega + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    pass_new = passengers + dt / 6.0 * (l1 + 2 * l2 + 2 * l3 + l4)
    return omega_new, pass_new, (psi1, psi2, psi3, psi4)


def _as_stack(grid, passengers):
    if passengers is None or len(passengers) == 0:
        return np.zeros((0,) + grid.shape, dtype=np.complex128)
    check_same_grid(*passengers)
    if passengers[0].grid != grid:
        raise ValueError("passenger fields must live on the flow grid")
    return np.stack([p.coeffs[0] for p in passengers])


def step_rk4(state, dt):
    """Advance the vorticity by one RK4 step."""
    new_state, _ = step_rk4_coupled(state, (), dt)
    return new_state


def step_rk4_coupled(state, passengers, dt):
    """Advance vorticity and A-transported passengers through shared RK4 stages."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    stack = _as_stack(grid, passengers)
    omega, stack, _ = rk4_coupled(grid, state.omega.coeffs[0], stack, dt)
    t = state.t + dt
    if not (np.all(np.isfinite(omega)) and np.all(np.isfinite(stack))):
        raise BlowUpError(t)
    new_state = FlowState2D(t, state.omega.replace(omega[None]), FourierField(grid, (omega * _inverse_laplacian(grid))[None], True))
    return new_state, [FourierField(grid, s[None], False) for s in stack]


def cfl_timestep(state, safety=0.5):
    """Documented guidance ``dt <= safety / (n * max|u|)``."""
    speed = np.abs(state.velocity().physical()).max()
    if speed == 0:
        return np.inf
    return safety / (state.grid.n * speed)


def step_count(dt, t_end):
    """Number of steps and the (possibly shortened) step landing exactly on ``t_end``."""
    if dt <= 0 or t_end < 0:
        raise ConfigurationError("need dt > 0 and t_end >= 0")
    if t_end == 0:
        return 0, dt
    nsteps = int(np.ceil(t_end / dt - 1e-9))
    return nsteps, t_end / nsteps


@dataclass
class SimulationResult:
    states: list
    records: list

    def column(self, name):
        return np.array([r[name] for r in self.records])


def run_simulation2d(
    ic,
    n,
    dt,
    t_end,
    observers: Sequence[Callable] = (),
    output_every: float | None = None,
):
    """Integrate from a named initial condition (or a given FlowState2D).

    Each record holds ``t``, ``energy``, ``enstrophy`` and whatever the
    observers return (each observer maps a state to a dict of floats).
    ``output_every`` defaults to every step.
    """
    if isinstance(ic, FlowState2D):
        state = ic
    else:
        grid = GridSpec(2, n)
        state = FlowState2D.from_vorticity(initial_vorticity(ic, grid))
    nsteps, dt = step_count(dt, t_end)
    every = 1 if not output_every else max(1, int(round(output_every / dt)))
    ceiling = ENSTROPHY_CEILING * max(enstrophy(state), np.finfo(float).tiny)

    def record(s):
        rec = {"t": s.t, "energy": energy(s), "enstrophy": enstrophy(s)}
        for obs in observers:
            rec.update(obs(s))
        return rec

    states, records = [state], [record(state)]
    for i in range(1, nsteps + 1):
        state = step_rk4(state, dt)
        if enstrophy(state) > ceiling:
            raise BlowUpError(state.t, "enstrophy exceeded 1e6 x initial")
        if i % every == 0 or i == nsteps:
            states.append(state)
            records.append(record(state))
    return SimulationResult(states, records)
