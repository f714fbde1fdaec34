"""Nested-lattice over-the-air summation: multi-layer joint source-channel
coding for computing sums of distributed continuous inputs over Gaussian and
fading multiple-access channels."""

__version__ = "0.1.0"

from .channel import ChannelRealization, NoiseSpec, draw_fading, fading_mac, gaussian_mac
from .codec import (
    EncoderConfig,
    EncodingRangeError,
    LayeredCodeword,
    aggregate_and_finalize,
    decode_layer,
    denormalize,
    encode_device,
    encode_devices,
    min_layers_required,
    normalize,
)
from .coeff_select import (
    CoefficientPlan,
    DeviceGroups,
    ReconstructionInfeasibleError,
    collective_two_group_search,
    direct_plan,
    exhaustive_oracle,
    group_devices,
    solve_reconstruction_weights,
    successive_two_group_search,
)
from .experiment import (
    ConfigError,
    ScenarioConfig,
    SweepPoint,
    SweepResult,
    analog_baseline_trial,
    read_csv,
    run_sweep,
    run_trial,
    write_csv,
)
from .lattice import (
    HEX_SECOND_MOMENT,
    ConstellationSet,
    LatticeSpec,
    NestedLatticeChain,
    coset_constellation,
    covering_radius_estimate,
    inradius,
    max_radius,
    nearest_point,
    nearest_points,
    sample_dither,
    second_moment,
)
from .receiver import (
    EffectiveNoiseContext,
    b_opt,
    decode_integer_function,
    effective_noise_var,
    reliability_margin,
    sigma_e_direct,
    successive_combiner,
)
