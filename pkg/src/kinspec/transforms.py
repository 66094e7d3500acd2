"""Operator calculus on the torus: Galilean shear, temporal weight map,
and the twisted convolution underlying the kinetic transport group.

The shear (Gamma(t) u)(x, v) = u(x + t v, v) acts on spectral fields as the
frequency relocation (k, xi) -> (k, xi - t k).  On the lattice it is applied
either as exact coefficient relocation (when t k lands on the xi-lattice for
every k) or as the phase multiplication exp(i t k.v) in the mixed
x-spectral / v-physical representation, which is exact for the resolved band.
"""

from __future__ import annotations

import numpy as np

from .spectral_core import Field, SpectralField, forward, inverse
from .trajectory import Trajectory, WeightParams

__all__ = [
    "WeightParams",
    "gamma_shear",
    "transport_term",
    "commutation_residual",
    "phi_mu",
    "phi_mu_inverse",
    "twisted_convolution",
    "shear_band_loss",
]


def _relocation_shift(F: SpectralField, t: float) -> int | None:
    """Integer xi-lattice shift per unit k-index, or None if off-lattice."""
    g = F.grid
    sigma = t * g.Lv / g.Lx
    rounded = round(sigma)
    if abs(sigma - rounded) < 1e-12 * max(1.0, abs(sigma)):
        return int(rounded)
    return None


def gamma_shear(F: SpectralField, t: float, mode: str = "auto") -> SpectralField:
    """Apply the shear Gamma(t) spectrally; the inverse is gamma_shear(., -t).

    mode 'relocate' moves coefficients (k, xi) <- (k, xi - t k) and requires
    the shift to be on the xi-lattice; 'phase' multiplies by exp(i t k.v) in
    the mixed representation; 'auto' relocates when possible.
    """
    g = F.grid
    if t == 0:
        return F.copy()
    sigma = _relocation_shift(F, t)
    if mode == "auto":
        mode = "relocate" if sigma is not None else "phase"
    if mode == "relocate":
        if sigma is None:
            raise ValueError(
                f"shift t*k for t={t} is off the xi-lattice; use mode='phase'"
            )
        coeffs = F.coeffs
        m_idx = np.rint(np.fft.fftfreq(g.Nx) * g.Nx).astype(int)
        for i in range(g.n):
            j_idx = np.arange(g.Nv)
            sh_m = [1] * (2 * g.n)
            sh_m[i] = g.Nx
            sh_j = [1] * (2 * g.n)
            sh_j[g.n + i] = g.Nv
            take = (j_idx.reshape(sh_j) - sigma * m_idx.reshape(sh_m)) % g.Nv
            take = np.broadcast_to(take, g.shape)
            coeffs = np.take_along_axis(coeffs, take, axis=g.n + i)
        return SpectralField(g, coeffs.copy())
    if mode == "phase":
        mixed = np.fft.ifftn(F.coeffs, axes=g.v_axes)
        phase = np.zeros(g.shape)
        for k, v in zip(g.k_mesh(), g.v_mesh()):
            phase = phase + k * v
        mixed = mixed * np.exp(1j * t * phase)
        return SpectralField(g, np.fft.fftn(mixed, axes=g.v_axes))
    raise ValueError(f"unknown shear mode {mode!r}")


def transport_term(F: SpectralField) -> SpectralField:
    """Spectral representation of v . grad_x u."""
    g = F.grid
    mixed = np.fft.ifftn(F.coeffs, axes=g.v_axes)
    kv = np.zeros(g.shape)
    for k, v in zip(g.k_mesh(), g.v_mesh()):
        kv = kv + k * v
    mixed = mixed * (1j * kv)
    return SpectralField(g, np.fft.fftn(mixed, axes=g.v_axes))


def commutation_residual(u: Trajectory) -> float:
    """Max interior-time L2 defect of d/dt Gamma(t) u = Gamma(t) (du/dt + v.grad_x u).

    Both time derivatives use the same central-difference stencil on the
    trajectory's uniform grid, so the residual measures only the commutation
    defect and decays at second order in the time step for smooth data.
    """
    if len(u) < 3:
        raise ValueError("commutation residual needs at least 3 time samples")
    dt = np.diff(u.times)
    if not np.allclose(dt, dt[0], rtol=1e-10):
        raise ValueError("commutation residual expects a uniform time grid")
    h = float(dt[0])
    sheared = [gamma_shear(f, t, mode="phase") for t, f in zip(u.times, u.fields)]
    worst = 0.0
    for j in range(1, len(u) - 1):
        lhs = (sheared[j + 1].coeffs - sheared[j - 1].coeffs) / (2 * h)
        dudt = SpectralField(u.grid, (u.fields[j + 1].coeffs - u.fields[j - 1].coeffs) / (2 * h))
        kin = SpectralField(u.grid, dudt.coeffs + transport_term(u.fields[j]).coeffs)
        rhs = gamma_shear(kin, float(u.times[j]), mode="phase").coeffs
        resid = SpectralField(u.grid, lhs - rhs).l2_norm()
        worst = max(worst, resid)
    return worst


def phi_mu(u: Trajectory, w: WeightParams | None = None) -> Trajectory:
    """Temporal weight map: multiply each sample by t^(1 - mu).

    Maps the weighted space isometrically onto the unweighted one, so the
    result carries weights with mu = 1 and the weighted norm of u equals the
    unweighted norm of the image at the quadrature level exactly.
    """
    w = w or u.weights
    if np.any(u.times <= 0) and w.mu < 1:
        raise ValueError("temporal weight is defined on the open interval t > 0")
    factors = u.times ** (1 - w.mu)
    out = u.scaled(factors)
    return out.with_weights(WeightParams(p=w.p, q=w.q, mu=1.0, T=w.T))


def phi_mu_inverse(u: Trajectory, w: WeightParams) -> Trajectory:
    """Inverse weight map: pointwise t^(mu - 1) scaling; exact round trip."""
    factors = u.times ** (w.mu - 1)
    out = u.scaled(factors)
    return out.with_weights(w)


def twisted_convolution(f: Field, g: Field, t: float) -> Field:
    """Convolution twisted by the transport group:

        (f *_t g)(x, v) = integral f(x - x~ - t v~, v - v~) g(x~, v~) dx~ dv~

    computed spectrally via f *_t g = (Gamma(-t) g) * f.  Satisfies the Young
    inequality ||f *_t g||_q <= ||f||_1 ||g||_q.
    """
    if f.grid != g.grid:
        raise ValueError("twisted convolution requires a shared grid")
    grid = f.grid
    sheared = inverse(gamma_shear(forward(g), -t), imag_tol=1e-8)
    conv = np.fft.ifftn(np.fft.fftn(f.values) * np.fft.fftn(sheared.values))
    out = Field(grid, conv.real * grid.cell_volume)
    out.meta["imag_residue"] = float(np.max(np.abs(conv.imag)) * grid.cell_volume)
    return out


def shear_band_loss(F: SpectralField, t: float) -> float:
    """Fraction of spectral l2 mass the shear moves beyond the resolved band.

    The phase-multiplication shear is exact only for modes whose image
    xi + t k stays inside the lattice; this measures the aliased remainder.
    """
    g = F.grid
    lost = np.zeros(g.shape, dtype=bool)
    for k, xi in zip(g.k_mesh(), g.xi_mesh()):
        img = xi + t * k
        lost |= np.broadcast_to((img < -g.xi_max) | (img >= g.xi_max), g.shape)
    total = float(np.sum(np.abs(F.coeffs) ** 2))
    if total == 0:
        return 0.0
    return float(np.sum(np.abs(F.coeffs[lost]) ** 2) / total)
