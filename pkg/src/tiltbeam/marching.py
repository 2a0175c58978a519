"""Space-marching driver composing the spectral and transport stages.

Each delta_x step applies the exact constant-coefficient diffraction stage
(FFT multiply) and then the upwind advection-reaction stage; one or two
rays advance in lockstep, coupled only through the nonlinear index shift.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import ConfigError, FieldLine, MediumSpec, RunConfig, cfl_number, \
    sample_incident_profile
from .spectral import SpectralGrid, boundary_data_g, init_boundary_field, \
    propagation_exponent
from .transport import absorbing_profile, advance_line, characteristic_line

__all__ = [
    "BlowUpError",
    "MarchState",
    "TimeEnvelopeParams",
    "march_one_ray",
    "march_two_ray",
    "time_envelope_step",
    "classical_schrodinger_march",
    "energy_balance_report",
    "BalanceReport",
]

# any cell reaching this intensity aborts the march
BLOWUP_INTENSITY = 1e12


class BlowUpError(RuntimeError):
    """Field lost finiteness (or exceeded the intensity cap) during a march."""

    def __init__(self, step: int):
        super().__init__(f"numerical blow-up at marching step {step}")
        self.step = step


@dataclass(frozen=True)
class MarchState:
    """Result of one marching run.

    ``intensity`` holds the summed |u|^2 of all rays at every station
    (single precision, stations along axis 0); absorbed energies are the
    running sums of 2*nu*|u|^2*dx*dy over the march.
    """

    config: RunConfig
    intensity: np.ndarray
    energies: np.ndarray
    g_lines: tuple
    initial_lines: tuple
    final_lines: tuple
    absorbed_medium: float
    absorbed_layer: float

    @property
    def n_steps(self) -> int:
        return self.intensity.shape[0] - 1

    def x_stations(self) -> np.ndarray:
        return self.config.grid.delta_x * np.arange(self.intensity.shape[0])


def _per_station(data, n_y: int, name: str):
    """Normalize scalar / line / per-station-plane data to a row lookup."""
    arr = np.asarray(data)
    if arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] == n_y):
        return lambda n: arr
    if arr.ndim == 2 and arr.shape[1] == n_y:
        return lambda n: arr[min(n, arr.shape[0] - 1)]
    raise ConfigError(f"{name} must be a scalar, an n_y line or an (n_x, n_y) plane")


def _march(config: RunConfig, source_planes=None, station_hook=None) -> MarchState:
    grid, medium = config.grid, config.medium
    n_x, n_y = grid.n_x, grid.n_y
    dx, dy = grid.delta_x, grid.delta_y
    sgrid = SpectralGrid.for_grid(grid)
    b_line = absorbing_profile(config.layer, n_y, grid.layer_width)
    nu1_at = _per_station(medium.nu1, n_y, "medium.nu1")
    mu_at = _per_station(medium.mu, n_y, "medium.mu")
    nonlinear = medium.mode == "nonlinear"

    thetas, upwinds, mults, g_lines, rays = [], [], [], [], []
    for beam in config.beams:
        thetas.append(cfl_number(grid, beam))
        upwinds.append(1 if beam.ky >= 0 else -1)
        mults.append(np.exp(propagation_exponent(sgrid.eta, medium.nu0, beam) * dx))
        g = boundary_data_g(beam, grid, config.g_mode)
        g_lines.append(g)
        rays.append(init_boundary_field(g, medium.nu0, beam, sgrid).values.copy())
    initial_lines = tuple(FieldLine(u, 0) for u in rays)

    if source_planes is None:
        source_at = lambda n: None
    else:
        lookup = _per_station(source_planes, n_y, "source")
        source_at = lambda n: lookup(n + 1)  # implicit stage targets station n+1

    intensity = np.empty((n_x + 1, n_y), dtype=np.float32)
    energies = np.empty(n_x + 1)
    absorbed_medium = 0.0
    absorbed_layer = 0.0

    def total_intensity():
        out = np.zeros(n_y)
        for u in rays:
            out += u.real**2 + u.imag**2
        return out

    cell_i = total_intensity()
    intensity[0] = cell_i
    energies[0] = cell_i.sum() * dy
    if station_hook is not None:
        station_hook(0, tuple(rays))

    for n in range(n_x):
        nu1_line = nu1_at(n)
        absorbed_medium += 2.0 * float(np.sum((medium.nu0 + nu1_line) * cell_i)) * dx * dy
        absorbed_layer += 2.0 * float(np.sum(b_line * cell_i)) * dx * dy

        for p, beam in enumerate(config.beams):
            rays[p] = np.fft.ifft(np.fft.fft(rays[p]) * mults[p])

        if nonlinear:
            w2 = np.zeros(n_y)
            for p in range(len(rays)):
                c = characteristic_line(rays[p], thetas[p], upwinds[p])
                w2 += c.real**2 + c.imag**2
            mu_line = np.expm1(-medium.alpha * w2)
        else:
            mu_line = mu_at(n)
        z = 0.5 * (np.asarray(nu1_line) + 1j * np.asarray(mu_line))
        source = source_at(n)

        for p, beam in enumerate(config.beams):
            rays[p] = advance_line(
                rays[p], thetas[p], beam.kx / dx, z, b_line, source,
                config.scheme_order, config.limiter, upwinds[p],
            )

        cell_i = total_intensity()
        peak = cell_i.max()
        if not np.isfinite(peak) or peak > BLOWUP_INTENSITY:
            raise BlowUpError(n + 1)
        intensity[n + 1] = cell_i
        energies[n + 1] = cell_i.sum() * dy
        if station_hook is not None:
            station_hook(n + 1, tuple(rays))

    return MarchState(
        config=config,
        intensity=intensity,
        energies=energies,
        g_lines=tuple(g_lines),
        initial_lines=initial_lines,
        final_lines=tuple(FieldLine(u, n_x) for u in rays),
        absorbed_medium=absorbed_medium,
        absorbed_layer=absorbed_layer,
    )


def march_one_ray(config: RunConfig, station_hook=None) -> MarchState:
    """March a single beam across the domain."""
    if len(config.beams) != 1:
        raise ConfigError("march_one_ray needs a config with exactly one beam")
    return _march(config, station_hook=station_hook)


def march_two_ray(config: RunConfig, station_hook=None) -> MarchState:
    """March two crossing beams coupled through the shared nonlinear index shift.

    The shift is evaluated from the combined characteristic amplitude
    w = sqrt(|u1|^2 + |u2|^2) of both rays, cell by cell, before each
    transport step.
    """
    if len(config.beams) != 2:
        raise ConfigError("march_two_ray needs a config with exactly two beams")
    b1, b2 = config.beams
    if not (b1.ky > 0 > b2.ky):
        raise ConfigError("two-ray mode expects ky1 > 0 > ky2")
    if config.medium.mode != "nonlinear":
        raise ConfigError("two-ray mode couples rays nonlinearly; set medium.mode = nonlinear")
    return _march(config, station_hook=station_hook)


@dataclass(frozen=True)
class TimeEnvelopeParams:
    """Coefficients of the time-envelope solve (one implicit time step).

    c in um/ps, densities dimensionless, delta_t in ps, k0 in rad/um.
    ``delta_n`` is the prescribed density perturbation (scalar, n_y line or
    (n_x, n_y) plane); this module does not evolve it.
    """

    c: float
    n_mean: float
    delta_t: float
    k0: float
    nu_diamond: float = 0.0
    delta_n: object = 0.0

    def __post_init__(self):
        if not 0.0 <= self.n_mean < 1.0:
            raise ConfigError(f"mean density must lie in [0, 1) (got {self.n_mean})")
        if not self.delta_t > 0:
            raise ConfigError(f"delta_t must be > 0 (got {self.delta_t})")
        if self.c <= 0 or self.k0 <= 0:
            raise ConfigError("c and k0 must be > 0")

    @property
    def root(self) -> float:
        return float(np.sqrt(1.0 - self.n_mean))

    @property
    def source_coef(self) -> float:
        return 1.0 / (self.c * self.root * self.delta_t)

    @property
    def nu(self) -> float:
        return self.source_coef + self.nu_diamond / (2.0 * self.root)

    def mu_field(self):
        return self.k0 * np.asarray(self.delta_n) / (2.0 * self.root)


def time_envelope_step(u_ini, params: TimeEnvelopeParams, config: RunConfig) -> MarchState:
    """One stationary solve of the time-envelope equation.

    Identical to a one-ray march with absorption and index shift derived
    from ``params`` plus the source u_ini/(c*sqrt(1-N_m)*delta_t) injected
    in the transport stage.  ``u_ini`` is the field of the previous time
    step: 0, a constant line (n_y,) or per-station planes (n_x+1, n_y).
    """
    if len(config.beams) != 1:
        raise ConfigError("time_envelope_step needs a config with exactly one beam")
    medium = MediumSpec(nu0=params.nu, nu1=0.0, mode="linear", mu=params.mu_field())
    cfg = replace(config, medium=medium)
    u_ini = np.asarray(u_ini)
    source = None if u_ini.ndim == 0 and u_ini == 0 else params.source_coef * u_ini
    return _march(cfg, source_planes=source)


def classical_schrodinger_march(config: RunConfig) -> MarchState:
    """Normal-incidence split-step reference: diffraction FFT stage plus
    implicit-midpoint reaction, with the incident profile as entrance data.

    Independent of the tilted-frame machinery; used to check that the full
    scheme reduces to it as ky -> 0.
    """
    if len(config.beams) != 1:
        raise ConfigError("the classical reference takes a single beam")
    beam, grid, medium = config.beam, config.grid, config.medium
    if abs(beam.ky) > 1e-9:
        raise ConfigError("the classical reference only applies at normal incidence")
    n_x, n_y = grid.n_x, grid.n_y
    dx, dy = grid.delta_x, grid.delta_y
    eta = 2.0 * np.pi * np.fft.fftfreq(n_y, d=dy)
    mult = np.exp(-(medium.nu0 + 0.5j * beam.epsilon * eta**2) * dx)
    b_line = absorbing_profile(config.layer, n_y, grid.layer_width)
    nu1_at = _per_station(medium.nu1, n_y, "medium.nu1")
    mu_at = _per_station(medium.mu, n_y, "medium.mu")
    cadv = 1.0 / dx

    u = sample_incident_profile(beam, grid).values.copy()
    intensity = np.empty((n_x + 1, n_y), dtype=np.float32)
    energies = np.empty(n_x + 1)
    cell_i = u.real**2 + u.imag**2
    intensity[0] = cell_i
    energies[0] = cell_i.sum() * dy
    absorbed_medium = absorbed_layer = 0.0
    u0 = FieldLine(u, 0)

    for n in range(n_x):
        nu1_line = nu1_at(n)
        absorbed_medium += 2.0 * float(np.sum((medium.nu0 + nu1_line) * cell_i)) * dx * dy
        absorbed_layer += 2.0 * float(np.sum(b_line * cell_i)) * dx * dy
        u = np.fft.ifft(np.fft.fft(u) * mult)
        if medium.mode == "nonlinear":
            mu_line = np.expm1(-medium.alpha * (u.real**2 + u.imag**2))
        else:
            mu_line = mu_at(n)
        z = 0.5 * (np.asarray(nu1_line) + 1j * np.asarray(mu_line))
        u = (cadv - z) * u / (cadv + z + b_line)
        cell_i = u.real**2 + u.imag**2
        peak = cell_i.max()
        if not np.isfinite(peak) or peak > BLOWUP_INTENSITY:
            raise BlowUpError(n + 1)
        intensity[n + 1] = cell_i
        energies[n + 1] = cell_i.sum() * dy

    return MarchState(
        config=config,
        intensity=intensity,
        energies=energies,
        g_lines=(u0,),
        initial_lines=(u0,),
        final_lines=(FieldLine(u, n_x),),
        absorbed_medium=absorbed_medium,
        absorbed_layer=absorbed_layer,
    )


@dataclass(frozen=True)
class BalanceReport:
    """Energy bookkeeping of a completed one-ray run.

    The stability bound states absorbed + entrance energies cannot exceed
    the incoming bound; ``residual`` is the relative closure error of
    influx = outflux + absorbed (lateral leakage counted as layer
    absorption), which vanishes under refinement for constant absorption.
    """

    absorbed_medium: float
    absorbed_layer: float
    boundary_energy: float
    incoming_bound: float
    prop1_margin: float
    influx: float
    outflux: float
    residual: float

    @property
    def prop1_satisfied(self) -> bool:
        return self.prop1_margin >= -1e-9


def _plane_flux(values: np.ndarray, nu: float, beam, sgrid: SpectralGrid, dy: float) -> float:
    """Energy flux through a constant-x plane, transverse derivative taken
    spectrally via the decaying-root relation d/dx F(u) = R F(u)."""
    uhat = np.fft.fft(values)
    r = propagation_exponent(sgrid.eta, nu, beam) - 1j * sgrid.eta * beam.ky / beam.kx
    dprime = np.fft.ifft((1j * beam.kx * sgrid.eta - beam.ky * r) * uhat)
    carried = 0.5 * beam.kx * float(np.sum(values.real**2 + values.imag**2)) * dy
    oblique = 0.5 * beam.epsilon * beam.ky * float(np.sum(np.imag(np.conj(values) * dprime))) * dy
    return carried - oblique


def energy_balance_report(state: MarchState, config: RunConfig) -> BalanceReport:
    """Check the stability bound and the influx = outflux + absorbed identity."""
    if len(config.beams) != 1:
        raise ConfigError("energy balance is reported for one-ray runs")
    beam, grid, medium = config.beam, config.grid, config.medium
    dy = grid.delta_y
    sgrid = SpectralGrid.for_grid(grid)
    u0 = state.initial_lines[0].values
    g = state.g_lines[0].values

    boundary_energy = beam.kx * float(np.sum(u0.real**2 + u0.imag**2)) * dy
    incoming_bound = 4.0 * beam.kx * float(np.sum(g.real**2 + g.imag**2)) * dy
    prop1_margin = incoming_bound - (state.absorbed_medium + boundary_energy)

    nu1 = medium.nu1
    nu_const = medium.nu0 + (float(nu1) if np.asarray(nu1).ndim == 0 else 0.0)
    influx = _plane_flux(u0, nu_const, beam, sgrid, dy)
    outflux = _plane_flux(state.final_lines[0].values, nu_const, beam, sgrid, dy)
    absorbed = 0.5 * (state.absorbed_medium + state.absorbed_layer)
    residual = (influx - outflux - absorbed) / influx if influx else 0.0

    return BalanceReport(
        absorbed_medium=state.absorbed_medium,
        absorbed_layer=state.absorbed_layer,
        boundary_energy=boundary_energy,
        incoming_bound=incoming_bound,
        prop1_margin=prop1_margin,
        influx=influx,
        outflux=outflux,
        residual=residual,
    )
