"""Exact constant-coefficient machinery for the diffraction stage.

All formulas use the principal square root (real part >= 0).  For zero
absorption the root argument can become negative real; numpy's principal
branch then returns +i*sqrt|.|, the continuous limit from positive
absorption.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .config import BeamSpec, EdgeLeakWarning, FieldLine, GridSpec

__all__ = [
    "SpectralGrid",
    "r_minus",
    "propagation_exponent",
    "spectral_stage_apply",
    "boundary_data_g",
    "init_boundary_field",
    "analytic_halfspace_solution",
]


@dataclass(frozen=True)
class SpectralGrid:
    """Transverse FFT frequencies eta_m = 2*pi*m/(n_y*dy), bin order of the DFT.

    The Nyquist bin carries +pi/dy (m in (-n/2, n/2]).  numpy's unnormalized
    forward / 1/n inverse convention is used throughout ("backward" norm).
    """

    n_y: int
    delta_y: float
    eta: np.ndarray
    norm: str = "backward"

    @classmethod
    def for_grid(cls, grid: GridSpec) -> "SpectralGrid":
        return cls.for_line(grid.n_y, grid.delta_y)

    @classmethod
    def for_line(cls, n_y: int, delta_y: float) -> "SpectralGrid":
        m = np.fft.fftfreq(n_y) * n_y
        if n_y % 2 == 0:
            m[n_y // 2] = n_y // 2
        eta = 2.0 * np.pi * m / (n_y * delta_y)
        eta.setflags(write=False)
        return cls(n_y, delta_y, eta)

    @property
    def parseval_weight(self) -> float:
        """Weight w with sum |u_hat|^2 * w == sum |u|^2 * dy."""
        return self.delta_y / self.n_y


def _root(eta, nu, beam: BeamSpec):
    """Principal sqrt(1 - 2*eps*ky*eta/kx^2 + 2i*nu*eps*ky^2/kx^2)."""
    kx2 = beam.kx**2
    arg = 1.0 - 2.0 * beam.epsilon * beam.ky * np.asarray(eta) / kx2 \
        + 2j * nu * beam.epsilon * beam.ky**2 / kx2
    return np.sqrt(arg + 0j)


def r_minus(eta, nu0: float, beam: BeamSpec):
    """Decaying root of the factorized symbol, per transverse frequency.

    Undefined at ky = 0 (the two leading terms diverge separately); use
    ``propagation_exponent`` there instead.
    """
    if beam.ky == 0:
        raise ValueError("r_minus is singular at ky = 0; use propagation_exponent")
    s = _root(eta, nu0, beam)
    eta = np.asarray(eta)
    return 1j * beam.kx * eta / beam.ky \
        - 1j * beam.kx / (beam.epsilon * beam.ky**2) * (1.0 - s)


def propagation_exponent(eta, nu0: float, beam: BeamSpec):
    """Per-unit-x spectral decay/rotation rate of the diffraction stage.

    Removable-singularity form of r_minus(eta) + i*eta*ky/kx; finite for
    ky = 0 and usable for nu0 = 0.  Its real part is <= 0 for nu0 >= 0.
    """
    s = _root(eta, nu0, beam)
    eta = np.asarray(eta)
    kx = beam.kx
    return -2.0 * nu0 / (kx * (1.0 + s)) \
        - 2j * eta * beam.epsilon * (eta - 1j * nu0 * beam.ky) / (kx**3 * (1.0 + s) ** 2)


def spectral_stage_apply(
    line: FieldLine, delta_x: float, nu0: float, beam: BeamSpec, sgrid: SpectralGrid
) -> FieldLine:
    """Advance one line by delta_x under diffraction plus constant absorption."""
    if len(line) != sgrid.n_y:
        raise ValueError(f"line length {len(line)} != spectral grid size {sgrid.n_y}")
    mult = np.exp(propagation_exponent(sgrid.eta, nu0, beam) * delta_x)
    out = np.fft.ifft(np.fft.fft(line.values) * mult)
    return FieldLine(out, line.x_index)


def _edge_check(values: np.ndarray, layer_width: int, what: str):
    intens = values.real**2 + values.imag**2
    peak = intens.max()
    w = layer_width
    if peak > 0 and max(intens[:w].max(), intens[-w:].max()) > 1e-14 * peak:
        warnings.warn(
            f"{what} is not negligible inside the absorbing strips; "
            "expect spurious wraparound",
            EdgeLeakWarning,
            stacklevel=3,
        )


def boundary_data_g(beam: BeamSpec, grid: GridSpec, mode: str = "analytic") -> FieldLine:
    """Entrance-edge data combining the incident profile and its oblique correction.

    ``analytic`` uses the closed-form transverse derivative of each Gaussian
    speckle; ``simplified`` drops the O(epsilon) correction and returns the
    incident profile itself (adequate for epsilon/L_s below ~0.1).
    """
    y = grid.y_nodes()
    g = np.zeros(grid.n_y, dtype=complex)
    for s in beam.speckles:
        yy = beam.kx * (y - s.center)
        h = s.amplitude * np.exp(1j * s.phase) * np.exp(-((yy / s.width) ** 2))
        if mode == "analytic":
            # (kx*d/dy - ky*d/dx) applied to a function of Y = kx*y - ky*x - kx*y_k
            # is d/dY; for the Gaussian that is -2Y/L_s^2 times the profile.
            h = h * (1.0 - 1j * beam.epsilon * beam.ky * yy / (beam.kx * s.width**2))
        elif mode != "simplified":
            raise ValueError(f"unknown boundary mode {mode!r}")
        g += h
    _edge_check(g, grid.layer_width, "boundary data")
    return FieldLine(g, 0)


def init_boundary_field(
    g: FieldLine, nu_in: float, beam: BeamSpec, sgrid: SpectralGrid
) -> FieldLine:
    """Entrance value of the field: spectral division 2*F(g)/(1 + root)."""
    ghat = np.fft.fft(g.values)
    u0 = np.fft.ifft(2.0 * ghat / (1.0 + _root(sgrid.eta, nu_in, beam)))
    return FieldLine(u0, 0)


def analytic_halfspace_solution(
    g: FieldLine, x: float, nu: float, beam: BeamSpec, sgrid: SpectralGrid
) -> FieldLine:
    """Exact constant-absorption solution at depth x from entrance data g.

    Evaluated per transverse bin: 2*F(g)/(1+root) damped and rotated by the
    decaying root over the distance x.  At x = 0 this coincides with
    ``init_boundary_field``.
    """
    if x < 0:
        raise ValueError(f"x must be >= 0 (got {x})")
    ghat = np.fft.fft(g.values)
    root = _root(sgrid.eta, nu, beam)
    # r_minus in the removable-singularity form, finite also for ky = 0
    r = propagation_exponent(sgrid.eta, nu, beam) - 1j * sgrid.eta * beam.ky / beam.kx
    u = np.fft.ifft(2.0 * ghat / (1.0 + root) * np.exp(r * x))
    return FieldLine(u, 0)
