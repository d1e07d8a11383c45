"""Molecular communication relaying between bacteria-population nodes.

Channel model, discretized capacity (Blahut-Arimoto), sense-and-forward
relay channels, and M-ary decode-and-forward error rates.
"""
from .channel import (
    ChannelParams,
    Geometry,
    OutputMoments,
    activation_probability,
    inverse_activation,
    output_log_density,
    output_moments,
    steady_state_concentration,
    variance_floor,
)
from .dmc import (
    CapacityResult,
    ChannelSizeError,
    DiscreteChannel,
    InvalidChannelError,
    blahut_arimoto,
    discretize_direct,
    discretize_joint,
    discretize_sum,
    input_grid,
    mutual_information,
)
from .relay import RelayConfig, build_channel, effective_amax, relay_reception_noise_variance
from .mary import (
    ConfusionMatrix,
    ErrorRateResult,
    IntegrationError,
    SymbolSet,
    error_probability_mc,
    error_probability_quadrature,
    make_symbol_set,
    receiver_map_decode,
    relay_confusion,
)
from .experiments import ExperimentConfig, emit, load_config, run_experiment

__version__ = "0.1.0"
