"""Single-hop model: diffusion attenuation, receptor activation and the
signal-dependent Gaussian output of a bacteria-population receiver.

Concentrations are in dimensionless model units. With the default
``gamma = kappa = 1`` the activation probability is simply ``A / (A + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

# relative / absolute variance floor (see ``variance_floor``)
REL_VAR_FLOOR = 1e-9
ABS_VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class ChannelParams:
    """Receptor and population constants of a node.

    gamma, kappa: binding affinity / dissociation constants
    sigma0_sq: aggregate relative noise variance of gamma and kappa
    n: bacteria per node
    n_receptors: receptors per bacterium
    a_max: largest concentration the transmitter can induce at the receiver
    """

    gamma: float = 1.0
    kappa: float = 1.0
    sigma0_sq: float = 0.1
    n: int = 25
    n_receptors: int = 10
    a_max: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")
        if not self.sigma0_sq >= 0:
            raise ValueError(f"sigma0_sq must be >= 0, got {self.sigma0_sq}")
        if self.n < 1 or int(self.n) != self.n:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if self.n_receptors < 1 or int(self.n_receptors) != self.n_receptors:
            raise ValueError(f"n_receptors must be a positive integer, got {self.n_receptors}")
        if not self.a_max > 0:
            raise ValueError(f"a_max must be > 0, got {self.a_max}")

    @classmethod
    def from_component_variances(cls, gamma, kappa, sigma_gamma_sq, sigma_kappa_sq, **kwargs):
        """Build params with ``sigma0_sq = s_g^2 / g^2 + s_k^2 / k^2``."""
        sigma0_sq = sigma_gamma_sq / gamma**2 + sigma_kappa_sq / kappa**2
        return cls(gamma=gamma, kappa=kappa, sigma0_sq=sigma0_sq, **kwargs)

    @property
    def total_receptors(self) -> int:
        return self.n * self.n_receptors

    @property
    def p_max(self) -> float:
        return activation_probability(self.a_max, self)

    def with_(self, **changes) -> "ChannelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class Geometry:
    """Distances tx->rx (r1), tx->relay (r2), relay->rx (r3) and diffusion coefficient."""

    r1: float = 1.0
    r2: float = 1.0
    r3: float = 1.0
    diffusion_coeff: float = 1.0

    def __post_init__(self):
        for name in ("r1", "r2", "r3", "diffusion_coeff"):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")


@dataclass(frozen=True)
class OutputMoments:
    mean: float
    variance: float


def activation_probability(a0, params: ChannelParams):
    """Probability that a single receptor is bound at concentration ``a0``.

    Accepts scalars or arrays.
    """
    a = np.asarray(a0, dtype=float)
    if np.any(a < 0) or np.any(np.isnan(a)):
        raise ValueError("concentration must be >= 0")
    ag = a * params.gamma
    out = ag / (ag + params.kappa)
    return float(out) if out.ndim == 0 else out


def inverse_activation(p0, params: ChannelParams):
    """Concentration producing activation probability ``p0`` (``0 <= p0 < 1``)."""
    p = np.asarray(p0, dtype=float)
    if np.any(p < 0) or np.any(p >= 1) or np.any(np.isnan(p)):
        raise ValueError("activation probability must lie in [0, 1)")
    out = params.kappa * p / (params.gamma * (1.0 - p))
    return float(out) if out.ndim == 0 else out


def steady_state_concentration(alpha, r, geometry: Geometry):
    """Steady-state concentration at distance ``r`` from a source emitting at rate ``alpha``."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not r > 0:
        raise ValueError(f"r must be > 0, got {r}")
    return alpha / (4.0 * math.pi * geometry.diffusion_coeff * r)


def _check_prob(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
        raise ValueError("activation probability must lie in [0, 1]")
    return p


def output_mean(p0, params: ChannelParams):
    return params.total_receptors * _check_prob(p0)


def output_variance(p0, params: ChannelParams):
    """Unfloored variance ``n N^2 p^2 (1-p)^2 sigma0^2`` of the activated-receptor count."""
    p = _check_prob(p0)
    return params.n * params.n_receptors**2 * (p * (1.0 - p)) ** 2 * params.sigma0_sq


def output_moments(p0: float, params: ChannelParams) -> OutputMoments:
    return OutputMoments(float(output_mean(p0, params)), float(output_variance(p0, params)))


def variance_floor(params: ChannelParams) -> float:
    """Lower clamp on the output variance so endpoint rows stay non-degenerate."""
    if params.sigma0_sq > 0:
        return REL_VAR_FLOOR * params.n * params.n_receptors**2 * params.sigma0_sq
    return ABS_VAR_FLOOR


def floored_variance(p0, params: ChannelParams, var_floor: float | None = None):
    if var_floor is None:
        var_floor = variance_floor(params)
    return np.maximum(output_variance(p0, params), var_floor)


def output_log_density(y, p0, params: ChannelParams, var_floor: float | None = None):
    """Gaussian log-density of the output count ``y`` given activation ``p0``.

    The variance is ``max(Var(Y), var_floor)``; ``var_floor`` defaults to
    :func:`variance_floor`.
    """
    if var_floor is None:
        var_floor = variance_floor(params)
    if not var_floor > 0:
        raise ValueError("var_floor must be > 0")
    mean = output_mean(p0, params)
    var = floored_variance(p0, params, var_floor)
    y = np.asarray(y, dtype=float)
    out = -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (y - mean) ** 2 / var
    return float(out) if np.ndim(out) == 0 else out
