"""Periodic grids, Fourier fields and the spectral operators built on them.

Coefficients use the unit-mode normalisation: the field ``exp(i k.x)`` has
coefficient exactly 1 at ``k``, so ``sum |c_k|^2`` is the mean of ``|f|^2``
over the torus.  Arrays are indexed ``[component, x, y(, z)]`` with each
axis in FFT order (``0, 1, ..., n/2-1, -n/2, ..., -1``).  The Nyquist
wavenumber ``-n/2`` is zeroed in every field this module produces.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from ._parallel import thread_count
from .errors import ConfigurationError, GridMismatchError


@dataclass(frozen=True)
class GridSpec:
    """Square (2D) or cubic (3D) periodic grid on ``[0, 2*pi)^dim``."""

    dim: int
    n: int

    def __post_init__(self):
        errors = []
        if self.dim not in (2, 3):
            errors.append(f"dim must be 2 or 3, got {self.dim}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 8 or self.n % 2:
            errors.append(f"n must be an even integer >= 8, got {self.n}")
        if errors:
            raise ConfigurationError(errors)

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def size(self):
        return self.n ** self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @property
    def dealias_cutoff(self):
        """Largest axis wavenumber kept by the 2/3 rule."""
        return self.n // 3

    def wavenumbers(self):
        """Integer wavenumber arrays, one per axis, broadcastable to ``shape``."""
        return _wavenumbers(self.dim, self.n)

    def ik(self):
        """``i*k`` per axis with the Nyquist wavenumber set to zero."""
        return _ik(self.dim, self.n)

    def k_squared(self):
        return _k_squared(self.dim, self.n)

    def keep_mask(self):
        """Boolean mask, False on every wavevector touching the Nyquist plane."""
        return _keep_mask(self.dim, self.n)

    def dealias_mask(self):
        return _dealias_mask(self.dim, self.n)

    def coordinates(self):
        """Physical grid points ``x_j = 2*pi*j/n`` as broadcastable arrays."""
        x = 2.0 * np.pi * np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij", sparse=True))

    def index_of(self, k):
        """Array index of the integer wavevector ``k`` (each entry in [-n/2, n/2))."""
        k = tuple(int(v) for v in k)
        if len(k) != self.dim or any(v < -self.n // 2 or v >= self.n // 2 for v in k):
            raise ValueError(f"wavevector {k} is not representable on a grid with n={self.n}")
        return tuple(v % self.n for v in k)


@lru_cache(maxsize=None)
def _wavenumbers(dim, n):
    k = np.rint(sfft.fftfreq(n, 1.0 / n)).astype(np.int64)
    return tuple(np.meshgrid(*([k] * dim), indexing="ij", sparse=True))


@lru_cache(maxsize=None)
def _keep_mask(dim, n):
    mask = np.ones((n,) * dim, dtype=bool)
    for k in _wavenumbers(dim, n):
        mask &= np.broadcast_to(k != -n // 2, mask.shape)
    return mask


@lru_cache(maxsize=None)
def _ik(dim, n):
    out = []
    for k in _wavenumbers(dim, n):
        ik = 1j * k.astype(float)
        ik[k == -n // 2] = 0.0
        out.append(ik)
    return tuple(out)


@lru_cache(maxsize=None)
def _k_squared(dim, n):
    return sum(k.astype(float) ** 2 for k in _wavenumbers(dim, n))


@lru_cache(maxsize=None)
def _dealias_mask(dim, n):
    mask = np.ones((n,) * dim, dtype=bool)
    for k in _wavenumbers(dim, n):
        mask &= np.broadcast_to(np.abs(k) <= n // 3, mask.shape)
    return mask


# -- raw array transforms -----------------------------------------------------

def to_physical(coeffs, dim):
    """Inverse transform over the trailing ``dim`` axes (unit-mode normalisation)."""
    return sfft.ifftn(coeffs, axes=tuple(range(-dim, 0)), norm="forward", workers=thread_count())


def to_spectral(values, dim):
    """Forward transform over the trailing ``dim`` axes (unit-mode normalisation)."""
    values = np.asarray(values)
    return sfft.fftn(values, axes=tuple(range(-dim, 0)), norm="forward", workers=thread_count())


def to_physical_real(coeffs, dim):
    """Inverse transform of conjugate-symmetric coefficients, returning real values."""
    n = coeffs.shape[-1]
    half = coeffs[..., : n // 2 + 1]
    return sfft.irfftn(half, s=(n,) * dim, axes=tuple(range(-dim, 0)), norm="forward", workers=thread_count())


def to_spectral_real(values, dim):
    """Forward transform of real values, expanded to the full coefficient array."""
    n = values.shape[-1]
    half = sfft.rfftn(values, axes=tuple(range(-dim, 0)), norm="forward", workers=thread_count())
    full = np.empty(values.shape, dtype=np.complex128)
    full[..., : n // 2 + 1] = half
    # c(k) = conj(c(-k)) fills the missing last-axis wavenumbers
    mirror = half[..., 1 : n - n // 2]
    for ax in range(-dim, -1):
        mirror = np.roll(np.flip(mirror, axis=ax), 1, axis=ax)
    full[..., n // 2 + 1 :] = np.conj(np.flip(mirror, axis=-1))
    return full


# -- the field value type -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class FourierField:
    """Spectral coefficients of a scalar or vector field on a periodic grid.

    ``coeffs`` has shape ``(components,) + grid.shape``.  ``real`` flags a
    field whose physical values are real, i.e. whose coefficients are
    conjugate-symmetric.
    """

    grid: GridSpec
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.ndim == self.grid.dim:
            coeffs = coeffs[None]
        if coeffs.shape[1:] != self.grid.shape or coeffs.shape[0] not in (1, self.grid.dim):
            raise ValueError(
                f"coefficient array of shape {coeffs.shape} does not fit "
                f"a {self.grid.dim}D grid with n={self.grid.n}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    # constructors

    @classmethod
    def zeros(cls, grid, components=1, real=True):
        return cls(grid, np.zeros((components,) + grid.shape, dtype=np.complex128), real)

    @classmethod
    def from_physical(cls, grid, values, real=None):
        """Transform point values (shape ``grid.shape`` or ``(c,) + grid.shape``)."""
        values = np.asarray(values)
        if values.ndim == grid.dim:
            values = values[None]
        if real is None:
            real = not np.iscomplexobj(values)
        if real:
            coeffs = to_spectral_real(np.ascontiguousarray(values.real, dtype=float), grid.dim)
        else:
            coeffs = to_spectral(values, grid.dim)
        return cls(grid, coeffs * grid.keep_mask(), bool(real))

    @classmethod
    def single_mode(cls, grid, k, amplitude=1.0):
        """The complex exponential ``amplitude * exp(i k.x)``."""
        coeffs = np.zeros((1,) + grid.shape, dtype=np.complex128)
        coeffs[(0,) + grid.index_of(k)] = amplitude
        return cls(grid, coeffs, real=False)

    # views

    @property
    def components(self):
        return self.coeffs.shape[0]

    @property
    def is_scalar(self):
        return self.components == 1

    def physical(self):
        values = to_physical(self.coeffs, self.grid.dim)
        return values.real if self.real else values

    def component(self, i):
        return FourierField(self.grid, self.coeffs[i : i + 1], self.real)

    def mean(self):
        """Zero-wavenumber coefficient of each component."""
        return self.coeffs[(slice(None),) + (0,) * self.grid.dim].copy()

    def replace(self, coeffs, real=None):
        return FourierField(self.grid, coeffs, self.real if real is None else real)

    def copy(self):
        return FourierField(self.grid, self.coeffs.copy(), self.real)

    # arithmetic

    def _check(self, other):
        if not isinstance(other, FourierField):
            return NotImplemented
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")
        if other.components != self.components:
            raise ValueError("component count mismatch")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FourierField(self.grid, self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return FourierField(self.grid, self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return FourierField(self.grid, -self.coeffs, self.real)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierField):
            return NotImplemented
        scalar = complex(scalar)
        return FourierField(self.grid, self.coeffs * scalar, self.real and scalar.imag == 0.0)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / complex(scalar))

    def __repr__(self):
        kind = "scalar" if self.is_scalar else f"{self.components}-vector"
        return f"FourierField({kind}, dim={self.grid.dim}, n={self.grid.n}, real={self.real})"


def check_same_grid(*fields):
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


# -- operations ---------------------------------------------------------------

def transform_roundtrip(field):
    """Inverse transform followed by forward transform."""
    values = to_physical(field.coeffs, field.grid.dim)
    if field.real:
        values = values.real
    return FourierField(field.grid, to_spectral(values, field.grid.dim) * field.grid.keep_mask(), field.real)


def derivative(field, axis):
    """Spectral partial derivative along ``axis`` (0 = x, 1 = y, 2 = z)."""
    if not 0 <= axis < field.grid.dim:
        raise ValueError(f"axis {axis} out of range for a {field.grid.dim}D field")
    return field.replace(field.coeffs * field.grid.ik()[axis])


def gradient(field):
    """Gradient of a scalar field as a vector field."""
    if not field.is_scalar:
        raise ValueError("gradient expects a scalar field")
    ik = field.grid.ik()
    return field.replace(np.concatenate([field.coeffs * ik[a] for a in range(field.grid.dim)]))


def laplacian(field):
    return field.replace(-field.grid.k_squared() * field.coeffs)


def solve_poisson(omega):
    """Zero-mean solution ``psi`` of ``laplacian(psi) = omega``."""
    k2 = omega.grid.k_squared()
    inv = np.zeros_like(k2)
    np.divide(-1.0, k2, out=inv, where=k2 > 0)
    return omega.replace(omega.coeffs * inv * omega.grid.keep_mask())


def dealias(field):
    """2/3 rule: zero every coefficient with some ``|k_i| > n/3``."""
    return field.replace(field.coeffs * field.grid.dealias_mask())


def sobolev_weight(grid, s):
    return (1.0 + grid.k_squared()) ** s


def sobolev_norm(field, s=0.0):
    """``( sum_k (1+|k|^2)^s |c_k|^2 )^(1/2)``, summed over components."""
    w = sobolev_weight(field.grid, s)
    return float(np.sqrt(np.sum(w * np.abs(field.coeffs) ** 2)))


def inner(f, g):
    """L2 inner product ``<f, g>`` (conjugate-linear in ``f``), normalised by the torus volume."""
    check_same_grid(f, g)
    return complex(np.vdot(f.coeffs, g.coeffs))


def conjugate_symmetry_defect(field):
    """Max relative violation of ``c(-k) = conj(c(k))``."""
    c = field.coeffs
    flipped = c
    for ax in range(1, c.ndim):
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    scale = np.abs(c).max()
    if scale == 0:
        return 0.0
    return float(np.abs(c - np.conj(flipped)).max() / scale)


def seeded_smooth_field(grid, components, seed, decay):
    """Real random field with Gaussian spectrum ``exp(-|k|^2 / decay^2)`` and zero mean.

    Coefficients are drawn from ``numpy.random.default_rng(seed)`` on a fixed
    box ``|k_i| <= ceil(6 decay)`` before being placed on the grid, so the
    same seed gives the same field on every grid fine enough to hold it.
    """
    box = int(np.ceil(6 * decay))
    rng = np.random.default_rng(seed)
    shape = (components,) + (2 * box + 1,) * grid.dim
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mirrored = np.conj(np.flip(c, axis=tuple(range(1, grid.dim + 1))))
    c = 0.5 * (c + mirrored)
    ks = np.meshgrid(*([np.arange(-box, box + 1)] * grid.dim), indexing="ij")
    c *= np.exp(-sum(k.astype(float) ** 2 for k in ks) / decay**2)
    c[(slice(None),) + (box,) * grid.dim] = 0.0
    keep = min(box, grid.dealias_cutoff)
    coeffs = np.zeros((components,) + grid.shape, dtype=np.complex128)
    sel = np.arange(-keep, keep + 1)
    src = np.ix_(*([sel + box] * grid.dim))
    dst = np.ix_(*([sel % grid.n] * grid.dim))
    for comp in range(components):
        coeffs[comp][dst] = c[comp][src]
    return FourierField(grid, coeffs, real=True)
