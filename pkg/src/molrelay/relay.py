"""Sense-and-forward relay channels.

The relay senses ``A2 = A0 r1 / r2`` and re-emits an amplified copy
``A3 = beta * A2``.

* ``single_type``: the relay uses the transmitter's molecule, so the
  receiver sees ``A0 (1 + r1 / r3)`` and the channel is the direct channel
  with a stretched concentration range.
* ``multi_type_*``: the relay uses a second molecule read by separate
  receptors, giving two conditionally independent outputs with the same
  activation ``p0``. ``multi_type_joint`` keeps both outputs,
  ``multi_type_sum`` keeps only their sum.

Relay reception noise
---------------------
The relay output noise ``Var(Y2) = n N^2 p2^2 (1 - p2)^2 sigma0^2`` is
mapped to an equivalent concentration error at the relay input through the
slope ``dE[Y2]/dA2 = nN p2 (1 - p2) / A2``, giving ``sigma0^2 A2^2 / n``.
Amplifying by ``beta = r2 / r3`` puts it in receiver units::

    Var(eps_r) = (sigma0^2 / n) * (A0 r1 / r3)^2

Pushed through the receiver's own linearization, its share of the
receiver output variance is ``rho^2`` with ``rho = (r1/r3) / (1 + r1/r3)``,
independent of ``A0``, ``n`` and ``sigma0``. When enabled, the output
variance of the single-type channel is inflated by ``1 + rho^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dmc
from .channel import ChannelParams, Geometry, activation_probability, inverse_activation

MODES = ("direct", "single_type", "multi_type_joint", "multi_type_sum")


@dataclass(frozen=True)
class RelayConfig:
    geometry: Geometry = field(default_factory=Geometry)
    mode: str = "direct"
    beta: float | None = None
    include_relay_noise: bool = False
    joint_coords: str = "pair"
    k_spread: int = dmc.DEFAULT_K_SPREAD

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        g = self.geometry
        if self.beta is None:
            natural = g.r2 / g.r3 if self.mode == "single_type" else g.r2 / g.r1
            object.__setattr__(self, "beta", natural)
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.mode == "single_type" and not np.isclose(self.beta, g.r2 / g.r3, rtol=1e-12):
            raise ValueError("single_type relaying requires beta = r2 / r3")
        if self.mode.startswith("multi_type") and not np.isclose(self.beta, g.r2 / g.r1, rtol=1e-12):
            raise ValueError("multi_type relaying requires beta = r2 / r1")


def effective_amax(params: ChannelParams, config: RelayConfig) -> float:
    """Largest concentration reaching the receiver, direct path plus relay."""
    if config.mode == "direct":
        return params.a_max
    if config.mode == "single_type":
        g = config.geometry
        return params.a_max * (1.0 + g.r1 / g.r3)
    raise ValueError(f"effective_amax is undefined for mode {config.mode!r}")


def relay_noise_share(geometry: Geometry) -> float:
    """Relay-noise share ``rho^2`` of the receiver output variance."""
    ratio = geometry.r1 / geometry.r3
    return (ratio / (1.0 + ratio)) ** 2


def relay_reception_noise_variance(params: ChannelParams, geometry: Geometry, p0: float = 0.5) -> float:
    """Variance of the receiver-side concentration error caused by relay reception noise.

    ``p0`` is the direct-path activation at the operating point.
    """
    a0 = inverse_activation(p0, params)
    return params.sigma0_sq / params.n * (a0 * geometry.r1 / geometry.r3) ** 2


def build_channel(params: ChannelParams, config: RelayConfig, k_in: int = dmc.DEFAULT_K_IN,
                  k_out: int | None = None) -> dmc.DiscreteChannel:
    """End-to-end discrete channel for ``config.mode``.

    Input levels are always direct-path activations ``p0``. ``k_out=None``
    picks the default of the underlying discretization.
    """
    mode = config.mode
    if mode == "multi_type_joint":
        return dmc.discretize_joint(params, k_in, k_out, coords=config.joint_coords, k_spread=config.k_spread)
    if k_out is None:
        k_out = dmc.DEFAULT_K_OUT
    if mode == "direct":
        return dmc.discretize_direct(params, k_in, k_out)
    if mode == "single_type":
        stretched = params.with_(a_max=effective_amax(params, config))
        var_scale = 1.0 + relay_noise_share(config.geometry) if config.include_relay_noise else 1.0
        ch = dmc.discretize_direct(stretched, k_in, k_out, var_scale=var_scale)
        # relabel receiver activations p_R by the direct-path p0 that produced them
        factor = stretched.a_max / params.a_max
        a_r = inverse_activation(ch.input_levels, stretched)
        p0 = activation_probability(a_r / factor, params)
        p0[-1] = params.p_max
        return dmc.DiscreteChannel(p0, ch.output_bins, ch.transition, "single_type")
    return dmc.discretize_sum(params, k_in, k_out)
