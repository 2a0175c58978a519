"""Split-step simulator for monochromatic beam propagation in a tilted frame.

The marching direction x makes an arbitrary (possibly large) angle with the
beam direction k; each step composes an exact FFT diffraction stage with a
flux-limited upwind transport stage.  See the README for the config format
and the command-line harnesses.
"""

from .config import (
    AbsorbingLayerSpec,
    BeamSpec,
    ConfigError,
    FieldLine,
    GridSpec,
    MediumSpec,
    RunConfig,
    Speckle,
    cfl_number,
    mirrored_beam,
    parse_config,
    sample_incident_profile,
    serialize_config,
    split_absorption,
)
from .diagnostics import (
    ComparisonReport,
    RunMetrics,
    beam_metrics,
    cfl_sweep,
    compare_to_reference,
    convergence_harness,
    emit_outputs,
    layer_sweep,
    limit_checks,
)
from .marching import (
    BalanceReport,
    BlowUpError,
    MarchState,
    TimeEnvelopeParams,
    classical_schrodinger_march,
    energy_balance_report,
    march_one_ray,
    march_two_ray,
    time_envelope_step,
)
from .spectral import (
    SpectralGrid,
    analytic_halfspace_solution,
    boundary_data_g,
    init_boundary_field,
    propagation_exponent,
    r_minus,
    spectral_stage_apply,
)
from .transport import (
    StepCoefficients,
    absorbing_profile,
    characteristic_value,
    gradient_ratio,
    limited_flux,
    limiter_phi,
    nonlinear_mu,
    transport_step,
)

__version__ = "0.1.0"
