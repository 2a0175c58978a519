"""Upwind advection-reaction stage with flux limiting and absorbing strips.

The native orientation moves the field towards increasing j (ky > 0); for
ky < 0 the step mirrors the line, applies the native update and mirrors
back, which is equivalent to a downwind-oriented stencil.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CFL_LIMIT, AbsorbingLayerSpec, BeamSpec, FieldLine, GridSpec

__all__ = [
    "StepCoefficients",
    "absorbing_profile",
    "advance_line",
    "characteristic_value",
    "characteristic_line",
    "gradient_ratio",
    "limiter_phi",
    "limited_flux",
    "transport_step",
    "nonlinear_mu",
]

# ratio assigned when the downwind energy gradient vanishes but the upwind
# one does not; any limiter saturates far below this
RATIO_SATURATION = 1e12


def absorbing_profile(layer: AbsorbingLayerSpec, n_y: int, layer_width: int = 5) -> np.ndarray:
    """Per-cell artificial damping, geometrically graded over both edge strips."""
    if n_y <= 2 * layer_width:
        raise ValueError(f"n_y={n_y} too small for strips of {layer_width} cells")
    b_line = np.zeros(n_y)
    w = layer_width
    j = np.arange(w + 1)
    b_line[: w + 1] = layer.b * layer.beta ** (w - j)
    b_line[n_y - 1 - w :] = b_line[w::-1]
    return b_line


def characteristic_line(values: np.ndarray, theta: float, upwind: int = 1) -> np.ndarray:
    """Convex combination theta*u_upwind + (1-theta)*u_j along each characteristic.

    ``upwind=1`` takes the j-1 neighbour (ky > 0), ``upwind=-1`` the j+1
    neighbour; the ghost cell beyond the edge is zero.
    """
    shifted = np.zeros_like(values)
    if upwind >= 0:
        shifted[1:] = values[:-1]
    else:
        shifted[:-1] = values[1:]
    return theta * shifted + (1.0 - theta) * values


def characteristic_value(line: FieldLine, j: int, theta: float) -> complex:
    """Value traced back along the characteristic through cell j (ky > 0 orientation)."""
    u = line.values
    u_up = u[j - 1] if j > 0 else 0.0
    return theta * u_up + (1.0 - theta) * u[j]


def limiter_phi(kind: str, lam):
    """Flux limiter value(s): zero for lam <= 0, at most 2 everywhere."""
    lam = np.asarray(lam, dtype=float)
    if kind == "vanleer":
        phi = (np.abs(lam) + lam) / (1.0 + np.abs(lam))
    elif kind == "clamped":
        phi = np.clip(lam, 0.0, 1.0)
    elif kind == "superbee":
        phi = np.maximum(0.0, np.maximum(np.minimum(2.0 * lam, 1.0), np.minimum(lam, 2.0)))
    else:
        raise ValueError(f"unknown limiter {kind!r}")
    return phi if phi.ndim else float(phi)


def _gradient_ratios(values: np.ndarray) -> np.ndarray:
    """Ratio of adjacent energy gradients, with zero ghost energies at both edges."""
    w = values.real**2 + values.imag**2
    num = w.copy()
    num[1:] -= w[:-1]  # w_j - w_{j-1}
    den = -w
    den[:-1] += w[1:]  # w_{j+1} - w_j
    lam = np.empty_like(w)
    ok = den != 0.0
    np.divide(num, den, out=lam, where=ok)
    flat = ~ok & (num == 0.0)
    lam[flat] = 1.0
    sat = ~ok & (num != 0.0)
    lam[sat] = np.sign(num[sat]) * RATIO_SATURATION
    return lam


def gradient_ratio(line: FieldLine, j: int) -> float:
    """Energy-gradient ratio at cell j; 0/0 counts as 1, x/0 saturates."""
    return float(_gradient_ratios(line.values)[j])


def _limited_fluxes(values: np.ndarray, theta: float, kind: str) -> np.ndarray:
    phi = limiter_phi(kind, _gradient_ratios(values))
    nxt = np.zeros_like(values)
    nxt[:-1] = values[1:]
    return values + 0.5 * (1.0 - theta) * (nxt - values) * phi


def limited_flux(line: FieldLine, j: int, theta: float, kind: str) -> complex:
    """Limited transport flux through the downwind face of cell j."""
    return complex(_limited_fluxes(line.values, theta, kind)[j])


@dataclass(frozen=True)
class StepCoefficients:
    """Per-step data of the advection-reaction stage.

    All lines may be scalars or per-cell arrays; ``source_line`` is the
    optional right-hand side of the time-envelope mode (zero when absent).
    """

    theta: float
    nu1_line: object = 0.0
    mu_line: object = 0.0
    b_line: object = 0.0
    source_line: object = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= CFL_LIMIT:
            raise ValueError(f"theta={self.theta} outside [0, {CFL_LIMIT}]")
        if np.any(np.asarray(self.nu1_line) < 0):
            raise ValueError("nu1 must be >= 0 everywhere")
        if np.any(np.asarray(self.b_line) < 0):
            raise ValueError("absorbing coefficients must be >= 0")


def _mirror(a):
    return a[::-1] if isinstance(a, np.ndarray) and a.ndim else a


def _transport_core(u, theta, cadv, z, b_line, source, order, kind):
    """Native ky > 0 update; cadv = kx/dx, z = (nu1 + i*mu)/2."""
    char = characteristic_line(u, theta)
    if order == 1 or theta == 1.0:
        # at theta = 1 the flux corrections vanish and both orders coincide
        numer = (cadv - z) * char
    else:
        fluxes = _limited_fluxes(u, theta, kind)
        prev = np.zeros_like(fluxes)
        prev[1:] = fluxes[:-1]
        numer = cadv * u - (theta * cadv) * (fluxes - prev) - z * char
    if source is not None:
        numer = numer + source
    return numer / (cadv + z + b_line)


def advance_line(u, theta, cadv, z, b_line, source, order, kind, upwind=1) -> np.ndarray:
    """ndarray entry point of the update; upwind=-1 mirrors for ky < 0."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2 (got {order})")
    if upwind >= 0:
        return _transport_core(u, theta, cadv, z, b_line, source, order, kind)
    out = _transport_core(
        u[::-1], theta, cadv, _mirror(z), _mirror(b_line),
        _mirror(source) if source is not None else None, order, kind,
    )
    return out[::-1]


def transport_step(
    line: FieldLine,
    coeffs: StepCoefficients,
    grid: GridSpec,
    beam: BeamSpec,
    order: int = 1,
    kind: str = "vanleer",
) -> FieldLine:
    """One advection-reaction update over delta_x.

    First order follows the characteristic with an implicit midpoint
    reaction; second order replaces the upwind difference by limited
    fluxes.  The two coincide exactly when theta = 1.
    """
    z = 0.5 * (np.asarray(coeffs.nu1_line) + 1j * np.asarray(coeffs.mu_line))
    out = advance_line(
        line.values, coeffs.theta, beam.kx / grid.delta_x, z,
        np.asarray(coeffs.b_line), coeffs.source_line, order, kind,
        1 if beam.ky >= 0 else -1,
    )
    return FieldLine(out, line.x_index)


def nonlinear_mu(w, alpha: float):
    """Self-focusing index shift exp(-alpha*w^2) - 1 for amplitude w >= 0."""
    w = np.asarray(w, dtype=float)
    out = np.expm1(-alpha * w * w)
    return out if out.ndim else float(out)
