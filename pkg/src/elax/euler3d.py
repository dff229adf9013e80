"""Pseudo-spectral integration of the 3D Euler equation in vorticity form.

    d/dt omega + (u . grad) omega - (omega . grad) u = 0,    u = BS(omega),

where ``BS`` is the spectral Biot-Savart operator.  Both advective products
are 2/3-dealiased and the right-hand side is projected onto solenoidal
fields at every RK4 stage.  Passenger fields ride along the same stages:
scalars under ``d/dt p + (u . grad) p = 0`` and complex vectors under
``d/dt p + (u . grad) p - (p . grad) u = 0``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .euler2d import ENSTROPHY_CEILING, SimulationResult, step_count
from .spectral import (
    FourierField,
    GridSpec,
    check_same_grid,
    dealias,
    seeded_smooth_field,
    sobolev_norm,
    to_physical,
    to_physical_real,
    to_spectral,
    to_spectral_real,
)

INITIAL_CONDITIONS = ("shear", "taylor_green", "random_smooth")


def _require_vector3(v):
    if v.grid.dim != 3 or v.components != 3:
        raise ValueError("expected a 3-vector field on a 3D grid")


def _inv_k2(grid):
    k2 = grid.k_squared()
    inv = np.zeros_like(k2)
    np.divide(1.0, k2, out=inv, where=k2 > 0)
    return inv * grid.keep_mask()


def _curl_coeffs(grid, c):
    ikx, iky, ikz = grid.ik()
    return np.stack([iky * c[2] - ikz * c[1], ikz * c[0] - ikx * c[2], ikx * c[1] - iky * c[0]])


def _project_coeffs(grid, c):
    ik = grid.ik()
    div = sum(ik[a] * c[a] for a in range(3))
    # ik.ik = -|k|^2, so subtracting ik * div / (-|k|^2) removes the gradient part
    return np.stack([c[a] + ik[a] * div * _inv_k2(grid) for a in range(3)])


def curl(v):
    _require_vector3(v)
    return v.replace(_curl_coeffs(v.grid, v.coeffs))


def divergence(v):
    _require_vector3(v)
    ik = v.grid.ik()
    return FourierField(v.grid, sum(ik[a] * v.coeffs[a] for a in range(3))[None], v.real)


def project_solenoidal(v):
    """Leray projection: remove the curl-free part of ``v``."""
    _require_vector3(v)
    return v.replace(_project_coeffs(v.grid, v.coeffs))


def biot_savart(omega):
    """Divergence-free, zero-mean velocity ``u`` with ``curl u = omega``.

    ``omega`` is projected onto solenoidal fields first; then
    ``u(k) = i k x omega(k) / |k|^2``.
    """
    _require_vector3(omega)
    grid = omega.grid
    c = _project_coeffs(grid, omega.coeffs)
    return omega.replace(_curl_coeffs(grid, c) * _inv_k2(grid))


def initial_vorticity3d(ic, grid):
    """Vorticity of a named 3D initial condition.

    ``shear``: ``u = A (sin z, 0, 0)``, ``omega = A (0, cos z, 0)``.
    ``taylor_green``: ``u = A (sin x cos y cos z, -cos x sin y cos z, 0)``.
    ``random_smooth``: seeded Gaussian-filtered noise, projected and
    rescaled to rms vorticity ``A``.
    """
    if grid.dim != 3:
        raise ConfigurationError("3D initial conditions need a 3D grid")
    x, y, z = grid.coordinates()
    zero = np.zeros(grid.shape)
    if ic.name == "shear":
        return FourierField.from_physical(grid, np.stack([zero, ic.amplitude * np.cos(z) + zero, zero]), real=True)
    if ic.name == "taylor_green":
        u = ic.amplitude * np.stack(
            [np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z), zero]
        )
        return curl(FourierField.from_physical(grid, u, real=True))
    if ic.name == "random_smooth":
        omega = dealias(project_solenoidal(seeded_smooth_field(grid, 3, ic.seed, ic.decay)))
        return omega * (ic.amplitude / sobolev_norm(omega, 0))
    raise ConfigurationError(f"unknown 3D initial condition {ic.name!r}; expected one of {INITIAL_CONDITIONS}")


@dataclass(frozen=True)
class FlowState3D:
    t: float
    omega: FourierField
    u: FourierField = field(repr=False)

    @classmethod
    def from_vorticity(cls, omega, t=0.0):
        _require_vector3(omega)
        omega = project_solenoidal(omega)
        c = omega.coeffs.copy()
        c[(slice(None), 0, 0, 0)] = 0.0
        omega = omega.replace(c)
        return cls(float(t), omega, biot_savart(omega))

    @property
    def grid(self):
        return self.omega.grid


def energy3d(state):
    """``||u||_0^2``."""
    return sobolev_norm(state.u, 0) ** 2


def helicity(state):
    """``<u, omega>`` (real for real fields)."""
    return float(np.vdot(state.u.coeffs, state.omega.coeffs).real)


def enstrophy3d(state):
    return sobolev_norm(state.omega, 0) ** 2


def divergence_defects(state):
    """Relative ``||div u||_0`` and ``||div omega||_0``."""
    out = {}
    for name, v in (("div_u", state.u), ("div_omega", state.omega)):
        scale = sobolev_norm(v, 0)
        out[name] = sobolev_norm(divergence(v), 0) / scale if scale > 0 else 0.0
    return out


# -- advection kernels ----------------------------------------------------------

def _gradients(grid, c):
    """``ik_j * c`` stacked along a new trailing-component axis: shape (..., 3, n, n, n)."""
    ik = grid.ik()
    return np.stack([ik[j] * c for j in range(3)], axis=-4)


def rhs_euler3d(state):
    """``-dealias((u.grad) omega) + dealias((omega.grad) u)``, solenoidal-projected."""
    d_omega, _, _, _ = coupled_rhs3d(state.grid, state.omega.coeffs, _empty_scalars(state.grid), _empty_vectors(state.grid))
    return state.omega.replace(d_omega)


def _empty_scalars(grid):
    return np.zeros((0,) + grid.shape, dtype=np.complex128)


def _empty_vectors(grid):
    return np.zeros((0, 3) + grid.shape, dtype=np.complex128)


def _dot_grad(a, grad_b):
    """``(a . grad) b``: ``a`` is (3, ...), ``grad_b`` is (..., 3, 3, ...) indexed [i, j] = d_j b_i."""
    return a[0] * grad_b[..., 0, :, :, :] + a[1] * grad_b[..., 1, :, :, :] + a[2] * grad_b[..., 2, :, :, :]


def coupled_rhs3d(grid, omega, scalars, vectors):
    """Derivatives of vorticity (3, ...), scalar passengers (p, ...) and vector passengers (q, 3, ...).

    Returns ``(domega, dscalars, dvectors, u)`` with ``u`` the stage velocity.
    Flow fields are real and go through half-spectrum transforms.
    """
    u = _curl_coeffs(grid, omega) * _inv_k2(grid)
    p, q = scalars.shape[0], vectors.shape[0]
    n3 = grid.shape
    flow = to_physical_real(
        np.concatenate([u, omega, _gradients(grid, u).reshape((9,) + n3), _gradients(grid, omega).reshape((9,) + n3)]),
        3,
    )
    u_p, om_p = flow[0:3], flow[3:6]
    grad_u, grad_om = flow[6:15].reshape((3, 3) + n3), flow[15:24].reshape((3, 3) + n3)

    mask = grid.dealias_mask()
    nonlinear = _dot_grad(om_p, grad_u) - _dot_grad(u_p, grad_om)
    d_omega = _project_coeffs(grid, to_spectral_real(nonlinear, 3) * mask)

    d_scalars = np.zeros_like(scalars)
    d_vectors = np.zeros_like(vectors)
    if p or q:
        phys = to_physical(
            np.concatenate(
                [
                    _gradients(grid, scalars).reshape((3 * p,) + n3),
                    vectors.reshape((3 * q,) + n3),
                    _gradients(grid, vectors).reshape((9 * q,) + n3),
                ]
            ),
            3,
        )
        grad_s = phys[: 3 * p].reshape((p, 3) + n3)
        vec_p = phys[3 * p : 3 * p + 3 * q].reshape((q, 3) + n3)
        grad_v = phys[3 * p + 3 * q :].reshape((q, 3, 3) + n3)
        if p:
            d_scalars = -to_spectral(u_p[0] * grad_s[:, 0] + u_p[1] * grad_s[:, 1] + u_p[2] * grad_s[:, 2], 3) * mask
        if q:
            lie = _dot_grad(u_p, grad_v) - np.stack([_dot_grad(vec_p[i], grad_u) for i in range(q)])
            d_vectors = -to_spectral(lie, 3) * mask
    return d_omega, d_scalars, d_vectors, u


def rk4_coupled3d(grid, omega, scalars, vectors, dt):
    k1, s1, v1, u1 = coupled_rhs3d(grid, omega, scalars, vectors)
    k2, s2, v2, u2 = coupled_rhs3d(grid, omega + 0.5 * dt * k1, scalars + 0.5 * dt * s1, vectors + 0.5 * dt * v1)
    k3, s3, v3, u3 = coupled_rhs3d(grid, omega + 0.5 * dt * k2, scalars + 0.5 * dt * s2, vectors + 0.5 * dt * v2)
    k4, s4, v4, u4 = coupled_rhs3d(grid, omega + dt * k3, scalars + dt * s3, vectors + dt * v3)
    w = dt / 6.0
    return (
        omega + w * (k1 + 2 * k2 + 2 * k3 + k4),
        scalars + w * (s1 + 2 * s2 + 2 * s3 + s4),
        vectors + w * (v1 + 2 * v2 + 2 * v3 + v4),
        (u1, u2, u3, u4),
    )


def step_rk4_3d(state, dt):
    new_state, _, _ = step_rk4_3d_coupled(state, (), (), dt)
    return new_state


def step_rk4_3d_coupled(state, scalars, vectors, dt):
    """Advance vorticity with scalar and vector passengers through shared RK4 stages."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = state.grid
    for f in list(scalars) + list(vectors):
        check_same_grid(state.omega, f)
    s_arr = np.stack([f.coeffs[0] for f in scalars]) if len(scalars) else _empty_scalars(grid)
    v_arr = np.stack([f.coeffs for f in vectors]) if len(vectors) else _empty_vectors(grid)
    omega, s_arr, v_arr, _ = rk4_coupled3d(grid, state.omega.coeffs, s_arr, v_arr, dt)
    t = state.t + dt
    if not all(np.all(np.isfinite(a)) for a in (omega, s_arr, v_arr)):
        raise BlowUpError(t)
    om = state.omega.replace(omega)
    new_state = FlowState3D(t, om, om.replace(_curl_coeffs(grid, omega) * _inv_k2(grid)))
    return (
        new_state,
        [FourierField(grid, a[None], False) for a in s_arr],
        [FourierField(grid, a, False) for a in v_arr],
    )


def run_simulation3d(ic, n, dt, t_end, observers=(), output_every=None):
    """3D analogue of :func:`elax.euler2d.run_simulation2d`.

    Records carry ``t``, ``energy``, ``helicity``, ``div_u``, ``div_omega``.
    """
    if isinstance(ic, FlowState3D):
        state = ic
    else:
        state = FlowState3D.from_vorticity(initial_vorticity3d(ic, GridSpec(3, n)))
    nsteps, dt = step_count(dt, t_end)
    every = 1 if not output_every else max(1, int(round(output_every / dt)))
    ceiling = ENSTROPHY_CEILING * max(enstrophy3d(state), np.finfo(float).tiny)

    def record(s):
        rec = {"t": s.t, "energy": energy3d(s), "helicity": helicity(s)}
        rec.update(divergence_defects(s))
        for obs in observers:
            rec.update(obs(s))
        return rec

    states, records = [state], [record(state)]
    for i in range(1, nsteps + 1):
        state = step_rk4_3d(state, dt)
        if enstrophy3d(state) > ceiling:
            raise BlowUpError(state.t, "enstrophy exceeded 1e6 x initial")
        if i % every == 0 or i == nsteps:
            states.append(state)
            records.append(record(state))
    return SimulationResult(states, records)
