"""Lax-pair auxiliary fields carried along Euler flows.

In 2D the pair is ``L phi = {omega, phi}`` and ``A phi = {psi, phi}``; a field
transported by ``d/dt phi + A phi = 0`` keeps ``||L phi||_s / ||phi||_s`` constant
when it is an eigenfunction of ``L``.  In 3D two pairs are supported:

* ``ms``:   ``L phi = (omega . grad) phi`` with scalar advection ``A phi = (u . grad) phi``
* ``childress``: ``L phi = [omega, phi]`` and ``A phi = [u, phi]`` where
  ``[a, b] = (a . grad) b - (b . grad) a``.

Rather than look for exact eigenfunctions, the checks here co-evolve
``eta = L phi`` as an independent passenger and measure how closely it
tracks ``L phi(t)`` computed from the evolved flow.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigurationError, DegenerateInputError, IllConditionedBasisError, UsageError
from .euler2d import (
    FlowState2D,
    _bracket_coeffs,
    initial_vorticity,
    poisson_bracket,
    step_count,
    step_rk4_coupled,
)
from .euler3d import FlowState3D, initial_vorticity3d, step_rk4_3d_coupled
from .spectral import FourierField, GridSpec, check_same_grid, sobolev_norm, to_physical, to_spectral
from .spectrum import assemble_L2d, assemble_L3d_ms, eigenpairs

GRAM_CONDITION_LIMIT = 1e12
DEGENERACY_TOL = 1e-10
DEFAULT_SOBOLEV = (0, 1, 2)
PAIRS_3D = ("ms", "childress")


def _complex(f):
    return f.replace(f.coeffs, real=False)


# -- auxiliary states -----------------------------------------------------------

@dataclass
class LaxState2D:
    """Auxiliary field ``phi`` with a nominal eigenvalue and its eigen-residual.

    ``residual`` is ``||L phi - lam phi||_0 / ||phi||_0`` measured on the grid
    when the state comes from an eigenvector, otherwise ``None``.
    """

    phi: FourierField
    lam: complex = 0j
    s: float = 0.0
    residual: float | None = None
    tolerance: float | None = None

    def __post_init__(self):
        if sobolev_norm(self.phi, 0) == 0:
            raise DegenerateInputError("auxiliary field phi is identically zero")
        if self.tolerance is not None and self.residual is not None and self.residual > self.tolerance:
            raise DegenerateInputError(
                f"eigen-residual {self.residual:.3e} exceeds tolerance {self.tolerance:.3e}"
            )


@dataclass
class LaxScalar3D(LaxState2D):
    """Scalar auxiliary field for the 3D ``ms`` pair."""


@dataclass
class LaxVector3D(LaxState2D):
    """Vector auxiliary field for the 3D ``childress`` pair."""

    def __post_init__(self):
        if self.phi.components != 3:
            raise UsageError("childress auxiliary fields are 3-vectors")
        super().__post_init__()


# -- operators ----------------------------------------------------------------

def L2d(omega, phi):
    """``{omega, phi}``, dealiased."""
    return poisson_bracket(omega, phi)


def A2d(psi, phi):
    """``{psi, phi}``, dealiased."""
    return poisson_bracket(psi, phi)


def _advect(a, phi):
    """``(a . grad) phi`` for a 3-vector ``a`` and a field ``phi`` with any number of components."""
    grid = check_same_grid(a, phi)
    if grid.dim != 3 or a.components != 3:
        raise UsageError("3D operators need 3-vector coefficients on a 3D grid")
    ik = grid.ik()
    c = phi.coeffs
    grads = np.stack([ik[j] * c for j in range(3)], axis=1)  # (comp, 3, ...)
    phys = to_physical(np.concatenate([a.coeffs, grads.reshape((-1,) + grid.shape)]), 3)
    a_p, g_p = phys[:3], phys[3:].reshape(grads.shape)
    prod = np.einsum("j...,cj...->c...", a_p, g_p)
    real = a.real and phi.real
    if real:
        prod = prod.real
    return FourierField(grid, to_spectral(prod, 3) * grid.dealias_mask(), real)


def _lie(a, b):
    """``(a . grad) b - (b . grad) a``."""
    if b.components != 3:
        raise UsageError("the childress operators act on 3-vector fields")
    return _advect(a, b) - _advect(b, a)


def L3d_ms(omega, phi):
    return _advect(omega, phi)


def A3d_ms(u, phi):
    return _advect(u, phi)


def L3d_childress(omega, phi):
    return _lie(omega, phi)


def A3d_childress(u, phi):
    return _lie(u, phi)


def _L3d(pair):
    if pair not in PAIRS_3D:
        raise ConfigurationError(f"unknown 3D Lax pair {pair!r}; expected one of {PAIRS_3D}")
    return L3d_ms if pair == "ms" else L3d_childress


# -- transport ----------------------------------------------------------------

def transport_step_2d(phi, psi, dt):
    """One RK4 step of ``d/dt phi = -{psi, phi}``.

    ``psi`` is either a single stream function (frozen flow) or the four
    stage stream functions produced by the flow stepper.
    """
    if isinstance(psi, FourierField):
        stages = (psi, psi, psi, psi)
    else:
        stages = tuple(psi)
        if len(stages) != 4:
            raise UsageError("need one stream function or four RK4 stage values")
    grid = check_same_grid(phi, *[s for s in stages if isinstance(s, FourierField)])
    coeffs = [s.coeffs[0] if isinstance(s, FourierField) else np.asarray(s) for s in stages]
    if any(c.shape != grid.shape for c in coeffs):
        raise UsageError("stage stream functions must live on the grid of phi")

    def rhs(k, c):
        return -_bracket_coeffs(grid, coeffs[k], c, False)

    c0 = phi.coeffs[0]
    k1 = rhs(0, c0)
    k2 = rhs(1, c0 + 0.5 * dt * k1)
    k3 = rhs(2, c0 + 0.5 * dt * k2)
    k4 = rhs(3, c0 + dt * k3)
    out = c0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise BlowUpError(float("nan"), "transported field became non-finite")
    return FourierField(grid, out[None], False)


# -- invariants ---------------------------------------------------------------

def _ratio(num, phi, s):
    den = sobolev_norm(phi, s)
    if den == 0:
        raise DegenerateInputError("||phi||_s vanishes")
    return sobolev_norm(num, s) / den


def invariant_I_2d(omega, phi, s=0.0):
    """``||{omega, phi}||_s / ||phi||_s``."""
    return _ratio(L2d(omega, phi), phi, s)


def invariant_I_3d(omega, phi, s=0.0, pair="ms"):
    """``||L phi||_s / ||phi||_s`` for the chosen 3D pair."""
    return _ratio(_L3d(pair)(omega, phi), phi, s)


# -- flow set-up helpers --------------------------------------------------------

def _flow2d(flow, n=None):
    if isinstance(flow, FlowState2D):
        return flow
    if n is None:
        raise UsageError("grid size n is required when starting from a named initial condition")
    return FlowState2D.from_vorticity(initial_vorticity(flow, GridSpec(2, n)))


def _flow3d(flow, n=None):
    if isinstance(flow, FlowState3D):
        return flow
    if n is None:
        raise UsageError("grid size n is required when starting from a named initial condition")
    return FlowState3D.from_vorticity(initial_vorticity3d(flow, GridSpec(3, n)))


def _schedule(dt, t_end, output_every):
    nsteps, dt = step_count(dt, t_end)
    every = 1 if not output_every else max(1, int(round(output_every / dt)))
    return nsteps, dt, every


def _sobolev_columns(values, sobolev):
    return {f"I_s{s:g}": v for s, v in zip(sobolev, values)}


@dataclass
class CheckResult:
    """Time series of a co-evolution check plus the final fields."""

    records: list
    final_state: object = None
    final_fields: list = field(default_factory=list)

    def column(self, name):
        return np.array([r[name] for r in self.records])


def _degeneracy_guard(eta0, omega, phi0):
    scale = sobolev_norm(omega, 1) * sobolev_norm(phi0, 1)
    if sobolev_norm(eta0, 0) <= DEGENERACY_TOL * max(scale, np.finfo(float).tiny):
        raise DegenerateInputError("L phi0 vanishes; choose a different phi0")


# -- commutation checks ---------------------------------------------------------

def commutation_check_2d(flow, phi0, dt, t_end, n=None, sobolev=DEFAULT_SOBOLEV, output_every=None):
    """Co-evolve ``phi`` and ``eta = {omega, phi}`` with the flow.

    ``r(t) = ||{omega(t), phi(t)} - eta(t)||_0 / ||eta_0||_0``.  ``flow`` is a
    FlowState2D or a NamedInitialCondition (then ``n`` is required).
    """
    state = _flow2d(flow, n)
    phi = _complex(phi0)
    check_same_grid(state.omega, phi)
    eta = _complex(L2d(state.omega, phi))
    _degeneracy_guard(eta, state.omega, phi)
    eta_norm = sobolev_norm(eta, 0)
    nsteps, dt, every = _schedule(dt, t_end, output_every)

    def record(st, ph, et):
        lphi = L2d(st.omega, ph)
        rec = {"t": st.t, "r_commutation": sobolev_norm(lphi - et, 0) / eta_norm}
        rec.update(_sobolev_columns([_ratio(lphi, ph, s) for s in sobolev], sobolev))
        rec["norm_phi"] = sobolev_norm(ph, 0)
        return rec

    records = [record(state, phi, eta)]
    for i in range(1, nsteps + 1):
        state, (phi, eta) = step_rk4_coupled(state, [phi, eta], dt)
        if i % every == 0 or i == nsteps:
            records.append(record(state, phi, eta))
    return CheckResult(records, state, [phi, eta])


def commutation_check_3d(flow, phi0, dt, t_end, pair="ms", n=None, sobolev=DEFAULT_SOBOLEV, output_every=None):
    """3D analogue of :func:`commutation_check_2d` for the ``ms`` or ``childress`` pair."""
    op = _L3d(pair)
    state = _flow3d(flow, n)
    phi = _complex(phi0)
    check_same_grid(state.omega, phi)
    expected = 1 if pair == "ms" else 3
    if phi.components != expected:
        raise UsageError(f"the {pair} pair needs a field with {expected} component(s)")
    eta = _complex(op(state.omega, phi))
    _degeneracy_guard(eta, state.omega, phi)
    eta_norm = sobolev_norm(eta, 0)
    nsteps, dt, every = _schedule(dt, t_end, output_every)

    def record(st, ph, et):
        lphi = op(st.omega, ph)
        rec = {"t": st.t, "r_commutation": sobolev_norm(lphi - et, 0) / eta_norm}
        rec.update(_sobolev_columns([_ratio(lphi, ph, s) for s in sobolev], sobolev))
        rec["norm_phi"] = sobolev_norm(ph, 0)
        return rec

    records = [record(state, phi, eta)]
    for i in range(1, nsteps + 1):
        if pair == "ms":
            state, (phi, eta), _ = step_rk4_3d_coupled(state, [phi, eta], (), dt)
        else:
            state, _, (phi, eta) = step_rk4_3d_coupled(state, (), [phi, eta], dt)
        if i % every == 0 or i == nsteps:
            records.append(record(state, phi, eta))
    return CheckResult(records, state, [phi, eta])


def transported_invariants_2d(flow, phis, dt, t_end, n=None, sobolev=DEFAULT_SOBOLEV, output_every=None):
    """``I_s(t)`` for several independently transported fields; one record list per field."""
    state = _flow2d(flow, n)
    phis = [_complex(p) for p in phis]
    nsteps, dt, every = _schedule(dt, t_end, output_every)

    def record(st, ph):
        rec = {"t": st.t}
        rec.update(_sobolev_columns([invariant_I_2d(st.omega, ph, s) for s in sobolev], sobolev))
        rec["norm_phi"] = sobolev_norm(ph, 0)
        return rec

    series = [[record(state, p)] for p in phis]
    for i in range(1, nsteps + 1):
        state, phis = step_rk4_coupled(state, phis, dt)
        if i % every == 0 or i == nsteps:
            for s, p in zip(series, phis):
                s.append(record(state, p))
    return series


# -- push-forward -------------------------------------------------------------

def pushforward_check(flow, phi0, f, dt, t_end, n=None, output_every=None):
    """Co-evolve ``zeta_0 = f(phi_0)`` and compare with ``f(phi(t))``.

    ``f`` acts pointwise on complex physical values.  Returns records with
    ``t`` and ``residual = ||f(phi(t)) - zeta(t)||_0 / ||zeta_0||_0``.
    """
    state = _flow2d(flow, n)
    phi = _complex(phi0)
    grid = check_same_grid(state.omega, phi)

    def apply(p):
        values = np.asarray(f(p.physical()[0]), dtype=np.complex128)
        values = np.broadcast_to(values, grid.shape)
        return FourierField.from_physical(grid, values[None], real=False)

    zeta = apply(phi)
    zeta_norm = sobolev_norm(zeta, 0)
    if zeta_norm == 0:
        raise DegenerateInputError("f(phi0) vanishes")
    nsteps, dt, every = _schedule(dt, t_end, output_every)
    records = [{"t": state.t, "residual": 0.0}]
    for i in range(1, nsteps + 1):
        state, (phi, zeta) = step_rk4_coupled(state, [phi, zeta], dt)
        if i % every == 0 or i == nsteps:
            records.append({"t": state.t, "residual": sobolev_norm(apply(phi) - zeta, 0) / zeta_norm})
    return CheckResult(records, state, [phi, zeta])


# -- expansion in auxiliary fields ----------------------------------------------

@dataclass
class ExpansionReport:
    coefficients: np.ndarray
    times: np.ndarray
    residuals: np.ndarray
    gram_condition: float
    coefficient_drift: np.ndarray

    def __post_init__(self):
        if np.any(self.residuals < 0):
            raise ValueError("residuals are norms and cannot be negative")


def sector_projection(f, kx):
    """Keep only the Fourier modes of ``f`` with x-wavenumber ``kx``."""
    keep = f.grid.wavenumbers()[0] == kx
    return f.replace(f.coeffs * keep, real=False)


def _basis_matrix(fields):
    return np.stack([f.coeffs.ravel() for f in fields], axis=1)


def expand_vorticity(flow, basis, dt, t_end, n=None, sector=None, target=None, output_every=None):
    """Expand a target in transported auxiliary fields and track the fit in time.

    The target defaults to the vorticity itself (restricted to ``sector``
    when given).  Coefficients are fitted once at ``t = 0`` by least squares
    and frozen; each basis field is A-transported, and ``residuals`` holds
    ``||target(t) - sum_j a_j phi_j(t)||_0``.  A custom ``target`` field is
    carried along by the same transport.  ``coefficient_drift`` is the
    largest change of a fresh least-squares fit relative to ``a``.
    """
    state = _flow2d(flow, n)
    phis = [_complex(b.phi if isinstance(b, LaxState2D) else b) for b in basis]
    if not phis:
        raise UsageError("the basis is empty")
    check_same_grid(state.omega, *phis)
    b0 = _basis_matrix(phis)
    sv = np.linalg.svd(b0, compute_uv=False)
    cond = float(sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else np.inf
    if not cond <= GRAM_CONDITION_LIMIT:
        raise IllConditionedBasisError(f"basis Gram matrix condition number {cond:.3e} exceeds {GRAM_CONDITION_LIMIT:g}")

    carried = target is not None
    if carried:
        tgt = _complex(target)
        check_same_grid(state.omega, tgt)

    def current_target(st, extra):
        if carried:
            return extra
        omega = _complex(st.omega)
        return sector_projection(omega, sector) if sector is not None else omega

    tgt0 = current_target(state, tgt if carried else None)
    coeffs = np.linalg.lstsq(b0, tgt0.coeffs.ravel(), rcond=None)[0]
    scale = max(1.0, float(np.abs(coeffs).max()))

    def measure(st, fields, extra):
        b = _basis_matrix(fields)
        y = current_target(st, extra).coeffs.ravel()
        res = float(np.linalg.norm(y - b @ coeffs))
        refit = np.linalg.lstsq(b, y, rcond=None)[0]
        return res, float(np.abs(refit - coeffs).max() / scale)

    nsteps, dt, every = _schedule(dt, t_end, output_every)
    times, residuals, drift = [state.t], [], []
    r, d = measure(state, phis, tgt if carried else None)
    residuals.append(r)
    drift.append(d)
    passengers = phis + ([tgt] if carried else [])
    for i in range(1, nsteps + 1):
        state, passengers = step_rk4_coupled(state, passengers, dt)
        if i % every == 0 or i == nsteps:
            fields = passengers[: len(phis)]
            r, d = measure(state, fields, passengers[-1] if carried else None)
            times.append(state.t)
            residuals.append(r)
            drift.append(d)
    return ExpansionReport(coeffs, np.array(times), np.array(residuals), cond, np.array(drift))


# -- eigen-probes ---------------------------------------------------------------

def _eigen_residual(op_fn, omega, phi, lam):
    lphi = op_fn(omega, phi)
    return sobolev_norm(lphi - phi * lam, 0) / sobolev_norm(phi, 0)


def eigen_probes(omega, m, sector=None, count=None, tolerance=None):
    """Eigenvectors of the Galerkin-truncated 2D operator as auxiliary states.

    Each probe carries its grid eigen-residual; ``count`` keeps the probes
    with the smallest residuals.
    """
    op = assemble_L2d(omega, m, sector=sector)
    return _probes(op, omega, L2d, LaxState2D, count, tolerance)


def eigen_probes_3d(omega, m, sector, count=None, tolerance=None):
    """Eigen-probes of the 3D ``ms`` operator in a ``(k_x, k_y)`` sector."""
    op = assemble_L3d_ms(omega, m, sector=sector)
    return _probes(op, omega, L3d_ms, LaxScalar3D, count, tolerance)


def _probes(op, omega, op_fn, cls, count, tolerance):
    grid = omega.grid
    if op.index.max() > grid.dealias_cutoff:
        raise UsageError("truncation box exceeds the dealiased grid; use a larger n or smaller m")
    vals, vecs = eigenpairs(op)
    states = []
    for lam, v in zip(vals, vecs.T):
        phi = op.vector_to_field(v, grid)
        res = _eigen_residual(op_fn, omega, phi, lam)
        states.append(cls(phi, complex(lam), 0.0, float(res)))
    states.sort(key=lambda st: st.residual)
    if count is not None:
        states = states[:count]
    if tolerance is not None:
        for st in states:
            st.tolerance = tolerance
            st.__post_init__()
    return states
