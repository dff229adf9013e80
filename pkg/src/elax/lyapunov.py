"""Stagnation points and finite-time Lyapunov exponents of the frozen vorticity flow.

A steady 2D vorticity ``omega`` generates the area-preserving vector field
``V = (omega_y, -omega_x)``.  Velocities and Jacobians are evaluated by direct
summation over the nonzero Fourier modes, which is exact for a truncated field.
"""

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .errors import UsageError
from .spectrum import significant_modes

SCAN_RESOLUTION = 64
NEWTON_TOL = 1e-12
RENORM_INTERVAL = 0.5
DEFAULT_DT = 1e-3


class VorticityFlowField:
    """Point evaluation of ``V = (omega_y, -omega_x)`` and its Jacobian."""

    def __init__(self, omega):
        if omega.grid.dim != 2 or not omega.is_scalar:
            raise UsageError("the Lyapunov flow needs a scalar vorticity on a 2D grid")
        ks, coeffs = significant_modes(omega)
        keep = np.any(ks != 0, axis=1)
        self.wavevectors = ks[keep].astype(float)
        self.coeffs = coeffs[0, keep]

    @property
    def is_trivial(self):
        return self.wavevectors.shape[0] == 0

    def _phases(self, points):
        points = np.atleast_2d(points)
        return self.coeffs * np.exp(1j * points @ self.wavevectors.T)

    def velocity(self, points):
        """``V`` at points of shape (p, 2); returns (p, 2)."""
        if self.is_trivial:
            return np.zeros(np.atleast_2d(points).shape)
        e = self._phases(points)
        kx, ky = self.wavevectors.T
        # omega_y = sum i ky c e, -omega_x = -sum i kx c e
        vx = (e @ (1j * ky)).real
        vy = -(e @ (1j * kx)).real
        return np.stack([vx, vy], axis=1)

    def jacobian(self, points):
        """``[[omega_xy, omega_yy], [-omega_xx, -omega_xy]]`` at each point, shape (p, 2, 2)."""
        p = np.atleast_2d(points).shape[0]
        if self.is_trivial:
            return np.zeros((p, 2, 2))
        e = self._phases(points)
        kx, ky = self.wavevectors.T
        wxx = -(e @ (kx * kx)).real
        wxy = -(e @ (kx * ky)).real
        wyy = -(e @ (ky * ky)).real
        return np.stack([np.stack([wxy, wyy], axis=1), np.stack([-wxx, -wxy], axis=1)], axis=1)

    def both(self, points):
        return self.velocity(points), self.jacobian(points)


# -- stagnation points --------------------------------------------------------

@dataclass
class StagnationPoint:
    position: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    kind: str  # saddle | center | degenerate

    @property
    def exponent(self):
        """Largest real part of the Jacobian eigenvalues."""
        return float(self.eigenvalues.real.max())


@dataclass
class TrajectoryExponents:
    x0: np.ndarray
    horizon: float
    exponents: np.ndarray
    history: np.ndarray  # rows (t, lambda_1, lambda_2)
    last_decade_slope: np.ndarray
    pinned: bool
    warnings: list = field(default_factory=list)


@dataclass
class LyapunovReport:
    stagnation_points: list = field(default_factory=list)
    unresolved: list = field(default_factory=list)
    every_point_stagnant: bool = False
    trajectories: list = field(default_factory=list)

    def saddles(self):
        return [p for p in self.stagnation_points if p.kind == "saddle"]


def _classify(eigenvalues, tol=1e-8):
    if np.all(np.abs(eigenvalues) <= tol):
        return "degenerate"
    if np.abs(eigenvalues.real).max() > tol:
        return "saddle"
    return "center"


def _wrap(points):
    return np.mod(points, 2 * np.pi)


def _periodic_distance(a, b):
    d = np.abs(_wrap(a) - _wrap(b))
    d = np.minimum(d, 2 * np.pi - d)
    return float(np.hypot(*d))


def _newton(flow, x, tol=NEWTON_TOL, maxiter=50):
    for _ in range(maxiter):
        v = flow.velocity(x)[0]
        if np.linalg.norm(v) <= tol:
            return x, True
        jac = flow.jacobian(x)[0]
        step = np.linalg.lstsq(jac, -v, rcond=None)[0]
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) == 0:
            break
        x = x + step
    return x, bool(np.linalg.norm(flow.velocity(x)[0]) <= tol)


def stagnation_analysis(omega, resolution=SCAN_RESOLUTION, tol=NEWTON_TOL):
    """Zeros of ``(omega_y, -omega_x)`` found by a grid scan plus Newton polishing.

    Scan cells whose speed is a local minimum seed Newton iterations (least
    squares steps, so non-isolated stagnation sets still converge).  Seeds
    that do not reach ``tol`` end up in ``unresolved``.
    """
    flow = VorticityFlowField(omega)
    report = LyapunovReport()
    if flow.is_trivial:
        report.every_point_stagnant = True
        return report
    h = 2 * np.pi / resolution
    xs = np.arange(resolution) * h
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    speed = np.linalg.norm(flow.velocity(pts), axis=1).reshape(resolution, resolution)
    local_min = np.ones_like(speed, dtype=bool)
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx or sy:
                local_min &= speed <= np.roll(np.roll(speed, sx, axis=0), sy, axis=1)
    for i, j in zip(*np.nonzero(local_min)):
        x, ok = _newton(flow, np.array([xs[i], xs[j]]), tol)
        x = _wrap(x)
        if not ok:
            report.unresolved.append(x)
            continue
        if any(_periodic_distance(x, p.position) < 1e-6 for p in report.stagnation_points):
            continue
        jac = flow.jacobian(x)[0]
        eig = np.linalg.eigvals(jac)
        report.stagnation_points.append(StagnationPoint(x, jac, eig, _classify(eig)))
    return report


# -- tangent QR ---------------------------------------------------------------

def _rhs(flow, x, m, frozen):
    v, jac = flow.both(x)
    v[frozen] = 0.0
    return v, jac @ m


def _rk4(flow, x, m, dt, frozen):
    k1, l1 = _rhs(flow, x, m, frozen)
    k2, l2 = _rhs(flow, x + 0.5 * dt * k1, m + 0.5 * dt * l1, frozen)
    k3, l3 = _rhs(flow, x + 0.5 * dt * k2, m + 0.5 * dt * l2, frozen)
    k4, l4 = _rhs(flow, x + dt * k3, m + dt * l3, frozen)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4), m + dt / 6 * (l1 + 2 * l2 + 2 * l3 + l4)


def _last_decade_slope(history):
    """``d lambda / d log10 t`` fitted over the last decade of the history."""
    t = history[:, 0]
    sel = t >= t[-1] / 10
    if sel.sum() < 2:
        return np.full(2, np.nan)
    return np.polyfit(np.log10(t[sel]), history[sel, 1:], 1)[0]


def lyapunov_qr(
    omega,
    x0,
    horizon,
    renorm_interval=RENORM_INTERVAL,
    dt=DEFAULT_DT,
    transient=0.1,
    pin_tol=1e-10,
):
    """Finite-time Lyapunov exponents of ``(omega_y, -omega_x)`` by tangent QR.

    ``x0`` is one point or an array (p, 2); all trajectories are advanced
    together.  Tangent matrices are re-orthonormalized every
    ``renorm_interval`` and the log stretch factors accumulated after the
    first ``transient * horizon`` time units give the exponents.  Starting
    points where the speed is below ``pin_tol`` are held fixed, so round-off
    cannot push a trajectory off an exact stagnation point.
    """
    if horizon <= 0 or renorm_interval <= 0 or dt <= 0:
        raise UsageError("horizon, renorm_interval and dt must be positive")
    if not 0 <= transient < 1:
        raise UsageError("transient must be a fraction in [0, 1)")
    flow = VorticityFlowField(omega)
    x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
    p = x.shape[0]
    frozen = np.linalg.norm(flow.velocity(x), axis=1) <= pin_tol
    m = np.broadcast_to(np.eye(2), (p, 2, 2)).copy()

    steps_per_block = max(1, int(round(renorm_interval / dt)))
    dt = renorm_interval / steps_per_block
    nblocks = max(1, int(np.ceil(horizon / renorm_interval - 1e-9)))
    skip = int(np.floor(transient * nblocks))
    logsum = np.zeros((p, 2))
    history = [[] for _ in range(p)]
    warnings = [[] for _ in range(p)]
    stiff = dt * float(np.sum(np.abs(flow.coeffs) * np.sum(flow.wavevectors**2, axis=1)))
    if stiff > 0.5:
        for w in warnings:
            w.append(f"dt*|J| bound {stiff:.3g} exceeds 0.5; tangent dynamics may be under-resolved")

    for b in range(nblocks):
        for _ in range(steps_per_block):
            x, m = _rk4(flow, x, m, dt, frozen)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(m))):
            for w in warnings:
                w.append(f"non-finite state at t={(b + 1) * renorm_interval:g}")
            break
        q, r = np.linalg.qr(m)
        diag = np.abs(np.diagonal(r, axis1=1, axis2=2))
        sign = np.sign(np.diagonal(r, axis1=1, axis2=2))
        sign[sign == 0] = 1.0
        m = q * sign[:, None, :]
        if b >= skip:
            logsum += np.log(diag)
            elapsed = (b + 1 - skip) * renorm_interval
            for i in range(p):
                history[i].append((b + 1) * renorm_interval)
                history[i].extend(logsum[i] / elapsed)
    t_total = nblocks * renorm_interval

    out = []
    for i in range(p):
        hist = np.array(history[i]).reshape(-1, 3)
        exps = hist[-1, 1:] if hist.size else np.full(2, np.nan)
        out.append(
            TrajectoryExponents(
                x0=np.atleast_2d(np.asarray(x0, dtype=float))[i].copy(),
                horizon=t_total,
                exponents=exps,
                history=hist,
                last_decade_slope=_last_decade_slope(hist) if hist.shape[0] else np.full(2, np.nan),
                pinned=bool(frozen[i]),
                warnings=warnings[i],
            )
        )
    return out


def lyapunov_report(omega, starts, horizon, **kwargs):
    """Stagnation analysis plus exponents for each start point.

    Starts are split into independent batches when ``ELAX_THREADS`` allows.
    """
    report = stagnation_analysis(omega)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    batches = [starts[i : i + 1] for i in range(starts.shape[0])]
    results = parallel_map(lambda s: lyapunov_qr(omega, s, horizon, **kwargs), batches)
    report.trajectories = [r for batch in results for r in batch]
    return report
