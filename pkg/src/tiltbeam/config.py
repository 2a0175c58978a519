"""Domain types, configuration parsing and incident-profile sampling.

Units are micrometers throughout; angles in the config file are degrees,
phases are radians.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "EdgeLeakWarning",
    "Speckle",
    "GridSpec",
    "BeamSpec",
    "MediumSpec",
    "AbsorbingLayerSpec",
    "FieldLine",
    "RunConfig",
    "cfl_number",
    "parse_config",
    "serialize_config",
    "sample_incident_profile",
    "split_absorption",
    "mirrored_beam",
]

# Upwind transport tolerates a slightly super-unit CFL (mildly extrapolating
# characteristic) before blowing up; the angle-robustness meshes need up to
# ~1.03, anything like 1.2 is rejected.
CFL_LIMIT = 1.05

LIMITERS = ("vanleer", "clamped", "superbee")
G_MODES = ("analytic", "simplified")
MEDIUM_MODES = ("linear", "nonlinear")


class ConfigError(ValueError):
    """Raised for unknown keys, missing keys or invariant violations."""


class EdgeLeakWarning(UserWarning):
    """Incident profile is not negligible inside the absorbing strips."""


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclass(frozen=True)
class Speckle:
    """One Gaussian hot spot of the incident beam profile."""

    amplitude: float
    center: float  # transverse position on the entrance edge (um)
    width: float  # half-width L_s (um)
    phase: float = 0.0  # radians

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"speckle width must be > 0 (got {self.width})")


@dataclass(frozen=True)
class GridSpec:
    """Rectangular marching grid: x is the marching direction, y transverse.

    n_y must be a power of two (the transverse stage is FFT based) and large
    enough to hold the two absorbing strips of ``layer_width`` cells each.
    """

    delta_x: float
    delta_y: float
    n_x: int
    n_y: int
    y_origin: float = 0.0
    layer_width: int = 5

    def __post_init__(self):
        if not self.delta_x > 0:
            raise ConfigError(f"grid.dx must be > 0 (got {self.delta_x})")
        if not self.delta_y > 0:
            raise ConfigError(f"grid.dy must be > 0 (got {self.delta_y})")
        if self.n_x < 1:
            raise ConfigError(f"grid n_x must be >= 1 (got {self.n_x})")
        if self.n_y < 2 * self.layer_width + 2:
            raise ConfigError(
                f"grid n_y={self.n_y} too small for two absorbing strips of "
                f"{self.layer_width} cells"
            )
        if self.n_y & (self.n_y - 1):
            raise ConfigError(f"grid n_y must be a power of two (got {self.n_y})")

    @classmethod
    def from_lengths(cls, dx, dy, lx, ly, y0=0.0, layer_width=5) -> "GridSpec":
        """Build a grid from physical lengths, padding n_y up to a power of two."""
        n_x = max(1, round(lx / dx))
        n_y = _next_pow2(max(2 * layer_width + 2, round(ly / dy)))
        return cls(dx, dy, n_x, n_y, y0, layer_width)

    @property
    def length_x(self) -> float:
        return self.n_x * self.delta_x

    @property
    def length_y(self) -> float:
        return self.n_y * self.delta_y

    def y_nodes(self) -> np.ndarray:
        return self.y_origin + self.delta_y * np.arange(self.n_y)

    def interior(self) -> slice:
        """Index range used for metrics: absorbing strips plus one guard cell excluded."""
        w = self.layer_width + 1
        return slice(w, self.n_y - w)


@dataclass(frozen=True)
class BeamSpec:
    """Propagation direction, envelope scale and incident speckle sum."""

    kx: float
    ky: float
    epsilon: float
    speckles: tuple = ()

    def __post_init__(self):
        if abs(self.kx**2 + self.ky**2 - 1.0) > 1e-12:
            raise ConfigError(
                f"beam direction ({self.kx}, {self.ky}) is not a unit vector"
            )
        if not self.kx > 0:
            raise ConfigError("beam.kx must be > 0 (beam must march into the domain)")
        if not self.epsilon > 0:
            raise ConfigError(f"beam.epsilon must be > 0 (got {self.epsilon})")
        object.__setattr__(self, "speckles", tuple(self.speckles))

    @classmethod
    def from_angle(cls, angle_deg, epsilon, speckles=()) -> "BeamSpec":
        a = math.radians(angle_deg)
        return cls(math.cos(a), math.sin(a), epsilon, tuple(speckles))

    @property
    def center_y(self) -> float:
        """Energy-weighted mean speckle center (origin of the ray on the entrance edge)."""
        if not self.speckles:
            raise ConfigError("beam has no speckles")
        w = [s.amplitude**2 for s in self.speckles]
        return sum(wk * s.center for wk, s in zip(w, self.speckles)) / sum(w)


def _as_readonly(a):
    if isinstance(a, np.ndarray):
        a = np.array(a, copy=True)
        a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MediumSpec:
    """Absorption split and refraction mode.

    nu0 is the constant absorption floor handled exactly by the spectral
    stage; nu1 (scalar or per-cell array) goes into the transport stage.
    In ``linear`` mode the refraction index shift ``mu`` is prescribed data
    (scalar, per-cell line, or per-station plane); in ``nonlinear`` mode it
    is exp(-alpha*|u|^2)-1 evaluated along characteristics.
    """

    nu0: float = 0.0
    nu1: object = 0.0  # float or ndarray
    mode: str = "linear"
    alpha: float = 0.0
    mu: object = 0.0  # float or ndarray, only read in linear mode

    def __post_init__(self):
        if self.mode not in MEDIUM_MODES:
            raise ConfigError(f"medium.mode must be one of {MEDIUM_MODES}")
        if self.nu0 < 0:
            raise ConfigError(f"medium.nu0 must be >= 0 (got {self.nu0})")
        if np.any(np.asarray(self.nu1) < 0):
            raise ConfigError("medium.nu1 must be >= 0 everywhere")
        if self.mode == "nonlinear" and self.alpha < 0:
            raise ConfigError(f"medium.alpha must be >= 0 (got {self.alpha})")
        object.__setattr__(self, "nu1", _as_readonly(self.nu1))
        object.__setattr__(self, "mu", _as_readonly(self.mu))


def split_absorption(nu) -> tuple:
    """Split a total absorption field into (nu0, nu1) with nu0 = inf(nu)."""
    nu = np.asarray(nu, dtype=float)
    if np.any(nu < 0):
        raise ConfigError("absorption must be >= 0 everywhere")
    nu0 = float(nu.min())
    return nu0, nu - nu0


@dataclass(frozen=True)
class AbsorbingLayerSpec:
    """Artificial damping strips: geometric grading b*beta^(depth) over the edge cells."""

    b: float = 0.1
    beta: float = 50.0

    def __post_init__(self):
        if self.b < 0:
            raise ConfigError(f"layer.b must be >= 0 (got {self.b})")
        if not self.beta > 1:
            raise ConfigError(f"layer.beta must be > 1 (got {self.beta})")


@dataclass(frozen=True)
class FieldLine:
    """One marching slice: complex envelope values at a fixed x station."""

    values: np.ndarray
    x_index: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex, copy=True)
        if v.ndim != 1:
            raise ValueError("field line must be one dimensional")
        if not np.all(np.isfinite(v.view(float))):
            raise ValueError("field line contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def energy(self, delta_y: float) -> float:
        """Discrete l2 energy sum |u_j|^2 * dy."""
        v = self.values
        return float(np.sum(v.real**2 + v.imag**2) * delta_y)


@dataclass(frozen=True)
class RunConfig:
    """Fully validated description of one marching run."""

    grid: GridSpec
    beams: tuple  # one or two BeamSpec
    medium: MediumSpec = field(default_factory=MediumSpec)
    layer: AbsorbingLayerSpec = field(default_factory=AbsorbingLayerSpec)
    scheme_order: int = 1
    limiter: str = "vanleer"
    g_mode: str = "analytic"
    snapshot_stride: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        beams = tuple(self.beams)
        object.__setattr__(self, "beams", beams)
        if len(beams) not in (1, 2):
            raise ConfigError(f"expected one or two beams (got {len(beams)})")
        if self.scheme_order not in (1, 2):
            raise ConfigError(f"scheme.order must be 1 or 2 (got {self.scheme_order})")
        if self.limiter not in LIMITERS:
            raise ConfigError(f"scheme.limiter must be one of {LIMITERS}")
        if self.g_mode not in G_MODES:
            raise ConfigError(f"scheme.g_mode must be one of {G_MODES}")
        if self.snapshot_stride < 0:
            raise ConfigError("output.stride must be >= 0")
        for b in beams:
            theta = cfl_number(self.grid, b)
            if theta > CFL_LIMIT:
                raise ConfigError(
                    f"CFL violation: theta={theta:.6g} > {CFL_LIMIT} for "
                    f"grid.dx={self.grid.delta_x}, grid.dy={self.grid.delta_y}, "
                    f"beam k=({b.kx}, {b.ky})"
                )

    @property
    def beam(self) -> BeamSpec:
        return self.beams[0]


def cfl_number(grid: GridSpec, beam: BeamSpec) -> float:
    """Transport CFL number |ky|/kx * dx/dy."""
    return abs(beam.ky) / beam.kx * grid.delta_x / grid.delta_y


def sample_incident_profile(beam: BeamSpec, grid: GridSpec, x: float = 0.0) -> FieldLine:
    """Sample the incident speckle sum on the y nodes at station x.

    Each speckle contributes a_k*exp(i*zeta_k)*exp(-(kx*(y-y_k)-ky*x)^2/Ls_k^2).
    Warns if the profile does not vanish inside the absorbing strips (the FFT
    stage would wrap the leak to the opposite edge).
    """
    y = grid.y_nodes()
    u = np.zeros(grid.n_y, dtype=complex)
    for s in beam.speckles:
        yy = beam.kx * (y - s.center) - beam.ky * x
        u += s.amplitude * np.exp(1j * s.phase) * np.exp(-((yy / s.width) ** 2))
    intens = u.real**2 + u.imag**2
    peak = intens.max()
    w = grid.layer_width
    if peak > 0 and max(intens[:w].max(), intens[-w:].max()) > 1e-14 * peak:
        warnings.warn(
            "incident profile is not negligible inside the absorbing strips; "
            "expect spurious wraparound",
            EdgeLeakWarning,
            stacklevel=2,
        )
    return FieldLine(u, 0)


# --- flat key = value config documents ------------------------------------

_SCALAR_KEYS = {
    "grid.dx",
    "grid.dy",
    "grid.lx",
    "grid.ly",
    "grid.y0",
    "beam.angle_deg",
    "beam.kx",
    "beam.ky",
    "beam.epsilon",
    "medium.nu0",
    "medium.nu1",
    "medium.alpha",
    "layer.b",
    "layer.beta",
}
_OTHER_KEYS = {
    "beam.speckles",
    "medium.mode",
    "scheme.order",
    "scheme.limiter",
    "scheme.g_mode",
    "output.dir",
    "output.stride",
}
# beam2.* describes the second ray of a crossing-beam run; absent fields fall
# back to the mirror image of beam 1.
_BEAM2_KEYS = {"beam2.angle_deg", "beam2.kx", "beam2.ky", "beam2.epsilon", "beam2.speckles"}
_KNOWN_KEYS = _SCALAR_KEYS | _OTHER_KEYS | _BEAM2_KEYS


def _parse_float(kv, key):
    try:
        return float(kv[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number ({kv[key]!r})") from None


def _parse_speckles(text, key):
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        bits = part.split(":")
        if len(bits) != 4:
            raise ConfigError(f"{key}: expected a:y:Ls:zeta tuples (got {part!r})")
        try:
            a, y, ls, zeta = (float(b) for b in bits)
        except ValueError:
            raise ConfigError(f"{key}: not numeric ({part!r})") from None
        out.append(Speckle(a, y, ls, zeta))
    if not out:
        raise ConfigError(f"{key}: no speckles given")
    return tuple(out)


def _parse_direction(kv, prefix):
    angle_key = f"{prefix}.angle_deg"
    kx_key, ky_key = f"{prefix}.kx", f"{prefix}.ky"
    if angle_key in kv and (kx_key in kv or ky_key in kv):
        raise ConfigError(f"give either {angle_key} or {kx_key}/{ky_key}, not both")
    if angle_key in kv:
        a = math.radians(_parse_float(kv, angle_key))
        return math.cos(a), math.sin(a)
    if (kx_key in kv) != (ky_key in kv):
        raise ConfigError(f"{kx_key} and {ky_key} must be given together")
    if kx_key in kv:
        return _parse_float(kv, kx_key), _parse_float(kv, ky_key)
    return None


def default_beam_center(grid: GridSpec, ky: float) -> float:
    """Default speckle center: 15% up from the downwind edge of the y extent."""
    frac = 0.15 if ky >= 0 else 0.85
    return grid.y_origin + frac * grid.length_y


def mirrored_beam(beam: BeamSpec, grid: GridSpec) -> BeamSpec:
    """The beam reflected about the mid-line of the y extent (ky negated)."""
    speckles = tuple(
        Speckle(s.amplitude, 2 * grid.y_origin + grid.length_y - s.center, s.width, s.phase)
        for s in beam.speckles
    )
    return BeamSpec(beam.kx, -beam.ky, beam.epsilon, speckles)


def parse_config(text: str) -> RunConfig:
    """Parse a flat ``key = value`` document into a validated RunConfig."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value' (got {raw!r})")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in kv:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        kv[key] = value

    missing = [k for k in ("grid.dx", "grid.dy", "grid.lx", "beam.epsilon") if k not in kv]
    direction = _parse_direction(kv, "beam")
    if direction is None:
        missing.append("beam.angle_deg (or beam.kx/beam.ky)")
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")

    dx = _parse_float(kv, "grid.dx")
    dy = _parse_float(kv, "grid.dy")
    lx = _parse_float(kv, "grid.lx")
    ly = _parse_float(kv, "grid.ly") if "grid.ly" in kv else lx
    y0 = _parse_float(kv, "grid.y0") if "grid.y0" in kv else 0.0
    if dx <= 0 or dy <= 0 or lx <= 0 or ly <= 0:
        raise ConfigError("grid.dx, grid.dy, grid.lx, grid.ly must all be > 0")
    grid = GridSpec.from_lengths(dx, dy, lx, ly, y0)

    epsilon = _parse_float(kv, "beam.epsilon")
    kx, ky = direction
    if "beam.speckles" in kv:
        speckles = _parse_speckles(kv["beam.speckles"], "beam.speckles")
    else:
        speckles = (Speckle(1.0, default_beam_center(grid, ky), 2.5, 0.0),)
    beams = [BeamSpec(kx, ky, epsilon, speckles)]

    direction2 = _parse_direction(kv, "beam2")
    has_beam2 = direction2 is not None or "beam2.speckles" in kv or "beam2.epsilon" in kv
    if has_beam2:
        if direction2 is None:
            kx2, ky2 = kx, -ky  # mirror of beam 1
        else:
            kx2, ky2 = direction2
        eps2 = _parse_float(kv, "beam2.epsilon") if "beam2.epsilon" in kv else epsilon
        if "beam2.speckles" in kv:
            speckles2 = _parse_speckles(kv["beam2.speckles"], "beam2.speckles")
        else:
            speckles2 = mirrored_beam(beams[0], grid).speckles
        beams.append(BeamSpec(kx2, ky2, eps2, speckles2))

    mode = kv.get("medium.mode", "linear").lower()
    alpha = _parse_float(kv, "medium.alpha") if "medium.alpha" in kv else 0.0
    if mode == "nonlinear" and "medium.alpha" not in kv:
        raise ConfigError("medium.alpha is required when medium.mode = nonlinear")
    medium = MediumSpec(
        nu0=_parse_float(kv, "medium.nu0") if "medium.nu0" in kv else 0.0,
        nu1=_parse_float(kv, "medium.nu1") if "medium.nu1" in kv else 0.0,
        mode=mode,
        alpha=alpha,
    )

    layer = AbsorbingLayerSpec(
        b=_parse_float(kv, "layer.b") if "layer.b" in kv else 0.1,
        beta=_parse_float(kv, "layer.beta") if "layer.beta" in kv else 50.0,
    )

    try:
        order = int(kv.get("scheme.order", "1"))
    except ValueError:
        raise ConfigError(f"scheme.order: not an integer ({kv['scheme.order']!r})") from None
    try:
        stride = int(kv.get("output.stride", "0"))
    except ValueError:
        raise ConfigError(f"output.stride: not an integer ({kv['output.stride']!r})") from None

    return RunConfig(
        grid=grid,
        beams=tuple(beams),
        medium=medium,
        layer=layer,
        scheme_order=order,
        limiter=kv.get("scheme.limiter", "vanleer").lower(),
        g_mode=kv.get("scheme.g_mode", "analytic").lower(),
        snapshot_stride=stride,
        output_dir=kv.get("output.dir", "out"),
    )


def serialize_config(config: RunConfig) -> str:
    """Write a RunConfig back to the flat document form (parse round-trips)."""
    med = config.medium
    if isinstance(med.nu1, np.ndarray) or isinstance(med.mu, np.ndarray):
        raise ConfigError("configs with per-cell medium fields are not serializable")
    g = config.grid

    def speckle_text(beam):
        return ";".join(
            f"{s.amplitude!r}:{s.center!r}:{s.width!r}:{s.phase!r}" for s in beam.speckles
        )

    lines = [
        f"grid.dx = {g.delta_x!r}",
        f"grid.dy = {g.delta_y!r}",
        f"grid.lx = {g.length_x!r}",
        f"grid.ly = {g.length_y!r}",
        f"grid.y0 = {g.y_origin!r}",
        f"beam.kx = {config.beam.kx!r}",
        f"beam.ky = {config.beam.ky!r}",
        f"beam.epsilon = {config.beam.epsilon!r}",
        f"beam.speckles = {speckle_text(config.beam)}",
    ]
    if len(config.beams) == 2:
        b2 = config.beams[1]
        lines += [
            f"beam2.kx = {b2.kx!r}",
            f"beam2.ky = {b2.ky!r}",
            f"beam2.epsilon = {b2.epsilon!r}",
            f"beam2.speckles = {speckle_text(b2)}",
        ]
    lines += [
        f"medium.nu0 = {med.nu0!r}",
        f"medium.nu1 = {float(med.nu1)!r}",
        f"medium.mode = {med.mode}",
        f"medium.alpha = {med.alpha!r}",
        f"layer.b = {config.layer.b!r}",
        f"layer.beta = {config.layer.beta!r}",
        f"scheme.order = {config.scheme_order}",
        f"scheme.limiter = {config.limiter}",
        f"scheme.g_mode = {config.g_mode}",
        f"output.dir = {config.output_dir}",
        f"output.stride = {config.snapshot_stride}",
    ]
    return "\n".join(lines) + "\n"
