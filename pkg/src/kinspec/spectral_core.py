"""Discrete phase-space torus, FFT contract, and Fourier multiplier application.

The torus [0, Lx)^n x [0, Lv)^n carries a regular lattice of Nx^n * Nv^n
points.  Fields are real samples on that lattice; spectral fields hold the
mean-normalized DFT coefficients on the frequency lattice

    k  in (2*pi/Lx) * {-Nx/2, ..., Nx/2 - 1}^n,
    xi in (2*pi/Lv) * {-Nv/2, ..., Nv/2 - 1}^n,

stored in numpy's native (unshifted) FFT order.  The forward transform is
normalized so that the (0, 0) coefficient equals the lattice mean of the
field, and Parseval reads ||f||_L2^2 = volume * sum |coeff|^2.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = [
    "TorusGrid",
    "Field",
    "SpectralField",
    "MultiplierSpec",
    "forward",
    "inverse",
    "apply_multiplier",
    "dx_power",
    "dv_power",
    "dv_laplacian",
    "xbsq_symbol",
    "spillover",
    "save_field",
    "load_field",
    "SPILLOVER_WARN",
]

SPILLOVER_WARN = 1e-6


def _is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class TorusGrid:
    """Regular lattice on the phase-space torus.

    n is the spatial dimension (1 or 2); the phase space has 2n dimensions.
    Nx, Nv are points per x / v axis (powers of two, >= 4); Lx, Lv the
    period lengths.
    """

    n: int = 1
    Nx: int = 128
    Nv: int = 128
    Lx: float = 2 * np.pi * 8
    Lv: float = 2 * np.pi * 8

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"spatial dimension n must be 1 or 2, got {self.n}")
        for name, N in (("Nx", self.Nx), ("Nv", self.Nv)):
            if N < 4 or not _is_power_of_two(N):
                raise ValueError(f"{name} must be a power of two >= 4, got {N}")
        if self.Lx <= 0 or self.Lv <= 0:
            raise ValueError("period lengths Lx, Lv must be positive")

    # -- lattice geometry ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        """Physical array shape: n x-axes followed by n v-axes."""
        return (self.Nx,) * self.n + (self.Nv,) * self.n

    @property
    def num_points(self) -> int:
        return self.Nx**self.n * self.Nv**self.n

    @property
    def volume(self) -> float:
        return self.Lx**self.n * self.Lv**self.n

    @property
    def cell_volume(self) -> float:
        return self.volume / self.num_points

    @property
    def hx(self) -> float:
        return self.Lx / self.Nx

    @property
    def hv(self) -> float:
        return self.Lv / self.Nv

    def x_axis(self) -> np.ndarray:
        """Signed coordinates in [-Lx/2, Lx/2), index 0 at the origin."""
        raw = np.arange(self.Nx) * self.hx
        return np.where(raw < self.Lx / 2, raw, raw - self.Lx)

    def v_axis(self) -> np.ndarray:
        """Signed velocities in [-Lv/2, Lv/2), index 0 at the origin."""
        raw = np.arange(self.Nv) * self.hv
        return np.where(raw < self.Lv / 2, raw, raw - self.Lv)

    def x_mesh(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays for the n x-axes."""
        out = []
        for i in range(self.n):
            sh = [1] * (2 * self.n)
            sh[i] = self.Nx
            out.append(self.x_axis().reshape(sh))
        return tuple(out)

    def v_mesh(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(self.n):
            sh = [1] * (2 * self.n)
            sh[self.n + i] = self.Nv
            out.append(self.v_axis().reshape(sh))
        return tuple(out)

    # -- frequency lattice --------------------------------------------------

    def k_axis(self) -> np.ndarray:
        """x-frequencies in FFT order, spacing 2*pi/Lx."""
        return np.fft.fftfreq(self.Nx, d=self.Lx / (2 * np.pi * self.Nx))

    def xi_axis(self) -> np.ndarray:
        return np.fft.fftfreq(self.Nv, d=self.Lv / (2 * np.pi * self.Nv))

    def k_mesh(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(self.n):
            sh = [1] * (2 * self.n)
            sh[i] = self.Nx
            out.append(self.k_axis().reshape(sh))
        return tuple(out)

    def xi_mesh(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(self.n):
            sh = [1] * (2 * self.n)
            sh[self.n + i] = self.Nv
            out.append(self.xi_axis().reshape(sh))
        return tuple(out)

    def k_stack(self) -> np.ndarray:
        """x-frequency components as an array of shape (n, *shape)."""
        return np.stack([np.broadcast_to(a, self.shape) for a in self.k_mesh()])

    def xi_stack(self) -> np.ndarray:
        return np.stack([np.broadcast_to(a, self.shape) for a in self.xi_mesh()])

    def k_norm2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in self.k_mesh():
            out = out + a**2
        return out

    def xi_norm2(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for a in self.xi_mesh():
            out = out + a**2
        return out

    @property
    def k_max(self) -> float:
        return (2 * np.pi / self.Lx) * (self.Nx // 2)

    @property
    def xi_max(self) -> float:
        return (2 * np.pi / self.Lv) * (self.Nv // 2)

    @property
    def x_axes(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    @property
    def v_axes(self) -> tuple[int, ...]:
        return tuple(range(self.n, 2 * self.n))


@dataclass
class Field:
    """Real samples on the physical lattice, x-major then v."""

    grid: TorusGrid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), dict(self.meta))


@dataclass
class SpectralField:
    """Complex DFT coefficients over the (k, xi) lattice, FFT order."""

    grid: TorusGrid
    coeffs: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} does not match grid shape {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), dict(self.meta))

    def l2_norm(self) -> float:
        """Lattice-weighted l2 norm, equal to the physical L2 norm (Parseval)."""
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeffs) ** 2)))


@dataclass(frozen=True)
class MultiplierSpec:
    """Scalar Fourier symbol m(k, xi) with a human-readable label.

    The callable receives component stacks of shape (n, *lattice) for k and
    xi and returns the symbol evaluated on the full lattice.
    """

    symbol: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str = ""

    def on_grid(self, grid: TorusGrid) -> np.ndarray:
        m = np.asarray(self.symbol(grid.k_stack(), grid.xi_stack()))
        m = np.broadcast_to(m, grid.shape)
        bad = ~np.isfinite(m)
        if np.any(bad):
            idx = tuple(np.argwhere(bad)[0])
            k = tuple(s[idx] for s in grid.k_stack())
            xi = tuple(s[idx] for s in grid.xi_stack())
            raise ValueError(
                f"multiplier '{self.label}' is not finite at lattice point k={k}, xi={xi}"
            )
        return m


def forward(f: Field) -> SpectralField:
    """Mean-normalized DFT: coeff(0,0) is the lattice mean of f."""
    if not np.all(np.isfinite(f.values)):
        bad = int(np.count_nonzero(~np.isfinite(f.values)))
        raise ValueError(f"field has {bad} non-finite sample(s); refusing to transform")
    coeffs = np.fft.fftn(f.values) / f.grid.num_points
    return SpectralField(f.grid, coeffs)


def inverse(F: SpectralField, imag_tol: float = 1e-10) -> Field:
    """Inverse transform back to a real field.

    The imaginary residue (relative to the field scale) must stay below
    imag_tol; otherwise the spectrum was not conjugate-symmetric and the
    offending mode is reported.  The observed residue is recorded in the
    returned field's meta dict.
    """
    w = np.fft.ifftn(F.coeffs * F.grid.num_points)
    scale = float(np.max(np.abs(w)))
    resid = float(np.max(np.abs(w.imag)))
    rel = resid / scale if scale > 0 else 0.0
    if rel > imag_tol:
        spec = np.fft.fftn(w.imag) / F.grid.num_points
        idx = tuple(int(i) for i in np.unravel_index(np.argmax(np.abs(spec)), spec.shape))
        raise ValueError(
            "spectrum is not conjugate-symmetric: relative imaginary residue "
            f"{rel:.3e} exceeds {imag_tol:.1e}; worst mode at lattice index {idx}"
        )
    out = Field(F.grid, w.real)
    out.meta["imag_residue"] = rel
    return out


def apply_multiplier(F: SpectralField, m: MultiplierSpec) -> SpectralField:
    """Pointwise multiplication of the coefficients by the symbol."""
    return SpectralField(F.grid, F.coeffs * m.on_grid(F.grid))


# -- common symbols ----------------------------------------------------------
#
# Fractional powers use the Riesz convention 0^s = 0 for s > 0 and 0^0 = 1,
# so |k|^s and |xi|^s are finite on the whole lattice.


def _pow_nonneg(base: np.ndarray, s: float) -> np.ndarray:
    if s == 0:
        return np.ones_like(base)
    with np.errstate(divide="ignore"):
        out = np.where(base > 0, base**s, 0.0)
    return out


def dx_power(s: float) -> MultiplierSpec:
    """Symbol |k|^s of the fractional derivative D_x^s."""

    def sym(k, xi):
        return _pow_nonneg(np.sqrt(np.sum(k**2, axis=0)), s)

    return MultiplierSpec(sym, label=f"|k|^{s}")


def dv_power(s: float) -> MultiplierSpec:
    """Symbol |xi|^s of the fractional derivative D_v^s."""

    def sym(k, xi):
        return _pow_nonneg(np.sqrt(np.sum(xi**2, axis=0)), s)

    return MultiplierSpec(sym, label=f"|xi|^{s}")


def dv_laplacian() -> MultiplierSpec:
    """Symbol -|xi|^2 of the velocity Laplacian."""

    def sym(k, xi):
        return -np.sum(xi**2, axis=0)

    return MultiplierSpec(sym, label="-|xi|^2")


def xbsq_symbol(s: float, beta: float) -> MultiplierSpec:
    """Weight ((1+|k|^2)^(beta/(2(beta+1))) + (1+|xi|^2)^(beta/2))^s."""

    def sym(k, xi):
        k2 = np.sum(k**2, axis=0)
        xi2 = np.sum(xi**2, axis=0)
        base = (1 + k2) ** (beta / (2 * (beta + 1))) + (1 + xi2) ** (beta / 2)
        return base**s

    return MultiplierSpec(sym, label=f"xbsq(s={s},beta={beta})")


# -- boundary spillover -------------------------------------------------------


def spillover(f: Field, warn: bool = True) -> float:
    """Fraction of the |f| mass in the outer 10 percent shell of the torus.

    Data is conventionally centered at the origin of the signed coordinates;
    a point is in the outer shell when any coordinate's magnitude exceeds
    0.45 of the period.  Diagnostics that rely on decay in the fundamental
    cell warn above SPILLOVER_WARN.
    """
    g = f.grid
    mask = np.zeros(g.shape, dtype=bool)
    for x in g.x_mesh():
        mask |= np.broadcast_to(np.abs(x) > 0.45 * g.Lx, g.shape)
    for v in g.v_mesh():
        mask |= np.broadcast_to(np.abs(v) > 0.45 * g.Lv, g.shape)
    total = float(np.sum(np.abs(f.values)))
    if total == 0:
        return 0.0
    frac = float(np.sum(np.abs(f.values)[mask]) / total)
    if warn and frac > SPILLOVER_WARN:
        warnings.warn(
            f"boundary spillover {frac:.2e} exceeds {SPILLOVER_WARN:.0e}; "
            "torus may be too small for this datum",
            stacklevel=2,
        )
    return frac


# -- snapshot format ----------------------------------------------------------
#
# A snapshot is <base>.bin (little-endian float64, row-major; spectral data
# interleaves re/im per coefficient) plus a sidecar <base>.json header.


def save_field(obj: Field | SpectralField, base: str | Path) -> tuple[Path, Path]:
    base = Path(base)
    g = obj.grid
    if isinstance(obj, Field):
        kind = "physical"
        payload = obj.values.astype("<f8").ravel()
    else:
        kind = "spectral"
        flat = obj.coeffs.ravel()
        payload = np.empty(2 * flat.size, dtype="<f8")
        payload[0::2] = flat.real
        payload[1::2] = flat.imag
    header = {"n": g.n, "Nx": g.Nx, "Nv": g.Nv, "Lx": g.Lx, "Lv": g.Lv, "kind": kind}
    bin_path = base.with_suffix(".bin")
    json_path = base.with_suffix(".json")
    bin_path.write_bytes(payload.tobytes())
    json_path.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return bin_path, json_path


def load_field(base: str | Path) -> Field | SpectralField:
    base = Path(base)
    header = json.loads(base.with_suffix(".json").read_text())
    grid = TorusGrid(
        n=header["n"], Nx=header["Nx"], Nv=header["Nv"], Lx=header["Lx"], Lv=header["Lv"]
    )
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    if header["kind"] == "physical":
        if raw.size != grid.num_points:
            raise ValueError("snapshot payload size does not match grid")
        return Field(grid, raw.reshape(grid.shape).copy())
    if header["kind"] == "spectral":
        if raw.size != 2 * grid.num_points:
            raise ValueError("snapshot payload size does not match grid")
        coeffs = raw[0::2] + 1j * raw[1::2]
        return SpectralField(grid, coeffs.reshape(grid.shape).copy())
    raise ValueError(f"unknown snapshot kind {header['kind']!r}")
