"""Seeded data families used by the diagnostics and the experiment runner.

All generators are deterministic functions of an explicit integer seed, and
the heavy-tail generator is additionally stable under band enlargement: the
coefficient at a fixed physical frequency does not depend on the grid size,
so refining the lattice extends the same function.
"""

from __future__ import annotations

import numpy as np

from .spectral_core import Field, SpectralField, TorusGrid, forward, inverse
from .trajectory import Trajectory, WeightParams
from .transforms import gamma_shear

__all__ = [
    "gaussian_bump",
    "gaussian_corpus",
    "band_noise",
    "band_noise_corpus",
    "shear_concentrated",
    "heavy_tail_field",
    "modulated_source",
    "source_corpus",
]


def gaussian_bump(
    grid: TorusGrid,
    sigma_x: float,
    sigma_v: float,
    amplitude: float = 1.0,
    center_x: float = 0.0,
    center_v: float = 0.0,
) -> Field:
    """Separable Gaussian bump, centered at the origin by default."""

    def wrap(d: np.ndarray, L: float) -> np.ndarray:
        return (d + L / 2) % L - L / 2

    expo = np.zeros(grid.shape)
    for x in grid.x_mesh():
        expo = expo + wrap(x - center_x, grid.Lx) ** 2 / (2 * sigma_x**2)
    for v in grid.v_mesh():
        expo = expo + wrap(v - center_v, grid.Lv) ** 2 / (2 * sigma_v**2)
    return Field(grid, amplitude * np.exp(-expo))


def gaussian_corpus(
    grid: TorusGrid,
    anisotropies: tuple[tuple[float, float], ...] = ((1.0, 1.0), (1.8, 0.7), (0.7, 1.8)),
    widths: tuple[float, ...] = (0.8, 1.2, 1.8, 2.6),
) -> list[tuple[str, Field]]:
    """Gaussian bumps: 3 shape anisotropies x 4 widths."""
    out = []
    for ax, av in anisotropies:
        for w in widths:
            label = f"gauss[{ax:g}x{av:g},w={w:g}]"
            out.append((label, gaussian_bump(grid, sigma_x=ax * w, sigma_v=av * w)))
    return out


def band_noise(grid: TorusGrid, band_frac: float, seed: int, normalize: bool = True) -> Field:
    """Real white noise band-limited to |k| <= frac*k_max, |xi| <= frac*xi_max."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(grid.shape)
    F = forward(Field(grid, white))
    mask = np.ones(grid.shape, dtype=bool)
    for k in grid.k_mesh():
        mask &= np.broadcast_to(np.abs(k) <= band_frac * grid.k_max, grid.shape)
    for xi in grid.xi_mesh():
        mask &= np.broadcast_to(np.abs(xi) <= band_frac * grid.xi_max, grid.shape)
    coeffs = np.where(mask, F.coeffs, 0.0)
    out = inverse(SpectralField(grid, coeffs))
    if normalize:
        scale = np.sqrt(np.sum(out.values**2) * grid.cell_volume)
        if scale > 0:
            out = Field(grid, out.values / scale)
    return out


def band_noise_corpus(
    grid: TorusGrid, bands: tuple[float, ...] = (0.15, 0.3, 0.5), seed: int = 0
) -> list[tuple[str, Field]]:
    return [
        (f"noise[band={b:g}]", band_noise(grid, b, seed + i)) for i, b in enumerate(bands)
    ]


def shear_concentrated(g: Field, t0: float) -> Field:
    """Data concentrated along sheared characteristics: Gamma(t0) applied to g."""
    return inverse(gamma_shear(forward(g), t0, mode="phase"), imag_tol=1e-6)


def _quasi_phases(m_stacks: list[np.ndarray], seed: int) -> np.ndarray:
    """Deterministic decorrelated phases as a function of integer mode indices."""
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.1, 0.9, size=6)
    acc = np.zeros(np.broadcast_shapes(*[m.shape for m in m_stacks]))
    for i, m in enumerate(m_stacks):
        acc = acc + c[i % 6] * m**2 + c[(i + 3) % 6] * m
    for i in range(len(m_stacks) - 1):
        acc = acc + c[(i + 1) % 6] * m_stacks[i] * m_stacks[i + 1]
    golden = 0.5 * (np.sqrt(5.0) - 1)
    return 2 * np.pi * np.mod(acc * golden, 1.0)


def heavy_tail_field(
    grid: TorusGrid,
    decay: float,
    alpha: tuple[float, ...],
    seed: int = 0,
    amplitude: float = 1.0,
) -> Field:
    """Rough datum with |coeff| = (1 + rho)^(-decay) in the anisotropic radius.

    Phases are a fixed function of the integer mode index, so enlarging the
    band (finer grid, same periods) extends the same function; coefficients
    are conjugate-symmetrized so the field is real, and the mean is zero.
    """
    if len(alpha) != 2 * grid.n:
        raise ValueError("anisotropy length must be 2n")
    comps = list(grid.k_mesh()) + list(grid.xi_mesh())
    rho = np.zeros(grid.shape)
    for z, a in zip(comps, alpha):
        rho = np.maximum(rho, np.broadcast_to(np.abs(z) ** (1 / a), grid.shape))
    amp = amplitude * (1 + rho) ** (-decay)

    m_stacks = []
    for N, axes in ((grid.Nx, range(grid.n)), (grid.Nv, range(grid.n, 2 * grid.n))):
        idx = np.rint(np.fft.fftfreq(N) * N).astype(float)
        for ax in axes:
            sh = [1] * (2 * grid.n)
            sh[ax] = N
            m_stacks.append(np.broadcast_to(idx.reshape(sh), grid.shape))
    theta = _quasi_phases(m_stacks, seed)

    # antisymmetrize the phases so that coeff(-m) = conj(coeff(m))
    neg = theta
    for ax, N in zip(range(2 * grid.n), [grid.Nx] * grid.n + [grid.Nv] * grid.n):
        take = (-np.arange(N)) % N
        neg = np.take(neg, take, axis=ax)
    theta_a = 0.5 * (theta - neg)

    coeffs = amp * np.exp(1j * theta_a)
    coeffs[(0,) * (2 * grid.n)] = 0.0
    return inverse(SpectralField(grid, coeffs), imag_tol=1e-8)


def modulated_source(
    base: Field | SpectralField,
    times: np.ndarray,
    weights: WeightParams,
    seed: int = 0,
) -> Trajectory:
    """Source trajectory a(t) * base with a smooth seeded modulation a(t)."""
    rng = np.random.default_rng(seed)
    c0 = rng.uniform(0.5, 1.5)
    c1 = rng.uniform(0.2, 0.8)
    om = rng.uniform(0.5, 4.0)
    ph = rng.uniform(0, 2 * np.pi)
    B = forward(base) if isinstance(base, Field) else base
    amps = c0 + c1 * np.cos(om * np.asarray(times) + ph)
    fields = [SpectralField(B.grid, a * B.coeffs) for a in amps]
    return Trajectory(np.asarray(times, dtype=float), fields, weights)


def source_corpus(
    grid: TorusGrid,
    times: np.ndarray,
    weights: WeightParams,
    band: float = 0.3,
    count: int = 3,
    seed: int = 0,
) -> list[tuple[str, Trajectory]]:
    """Band-limited modulated sources for the solver diagnostics."""
    out = []
    for i in range(count):
        base = band_noise(grid, band, seed=seed + 17 * i)
        out.append((f"src[{i}]", modulated_source(base, times, weights, seed=seed + 31 * i)))
    return out
