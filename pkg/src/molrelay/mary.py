"""M-ary signaling with decode-and-forward relaying.

Symbol ``i`` is a concentration ``A_i`` induced at the receiver. By the
steady-state distance law the relay sees ``B_i = A_i r1 / r2``, decodes a
symbol ``j`` by MAP, and re-emits it so that it adds ``C_j = A_j r1 / r3``
at the receiver. The receiver observes the count for ``A_i + C_j`` and
decodes ``i`` by MAP over the mixture ``sum_j R[i, j] N(y; i, j)`` where
``R`` is the relay confusion matrix.

Every observation is Gaussian with mean ``nN p`` and variance
``n N^2 p^2 (1 - p)^2 sigma0^2`` (floored), at the relay and the receiver.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp, ndtr

from . import dmc
from .channel import (
    ChannelParams,
    Geometry,
    activation_probability,
    floored_variance,
    inverse_activation,
    output_mean,
)

Z95 = 1.959963984540054
CHUNK = 100_000
QUAD_SIGMAS = 8.0
QUAD_RTOL = 1e-6


class IntegrationError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class SymbolSet:
    concentrations: np.ndarray
    prior: np.ndarray
    a_max: float | None = None

    def __post_init__(self):
        c = np.asarray(self.concentrations, dtype=float)
        pr = np.asarray(self.prior, dtype=float)
        if c.ndim != 1 or c.size < 1 or pr.shape != c.shape:
            raise ValueError("concentrations and prior must be 1-D of equal length")
        if np.any(c < 0) or np.any(np.diff(c) <= 0):
            raise ValueError("concentrations must be >= 0 and strictly increasing")
        if self.a_max is not None and c[-1] > self.a_max * (1 + 1e-12):
            raise ValueError("concentrations exceed a_max")
        if np.any(pr < 0) or abs(pr.sum() - 1.0) > 1e-9:
            raise ValueError("prior must be a probability vector")
        object.__setattr__(self, "concentrations", c)
        object.__setattr__(self, "prior", pr)

    @property
    def m(self) -> int:
        return self.concentrations.size


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``entries[i, j] = P(relay decodes j | i sent)``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("confusion matrix must be square")
        if np.any(e < 0) or np.any(np.abs(e.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("confusion rows must be probability vectors")
        object.__setattr__(self, "entries", e)

    @classmethod
    def identity(cls, m: int) -> "ConfusionMatrix":
        return cls(np.eye(m))


@dataclass(frozen=True)
class ErrorRateResult:
    p_error: float
    method: str
    trials: int | None = None
    errors: int | None = None
    ci95_low: float | None = None
    ci95_high: float | None = None
    seed: int | None = None

    @property
    def wilson_se(self) -> float | None:
        if self.ci95_low is None:
            return None
        return (self.ci95_high - self.ci95_low) / (2.0 * Z95)


def wilson_interval(errors: int, trials: int, z: float = Z95) -> tuple[float, float]:
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


# ------------------------------------------------------------------ symbols


def _placement(name, m, params):
    if callable(name):
        return np.asarray(name(m, params), dtype=float)
    if name == "equi_p":
        return inverse_activation(np.linspace(0.0, params.p_max, m), params)
    if name == "equi_a":
        return np.linspace(0.0, params.a_max, m)
    raise ValueError(f"unknown placement {name!r}")


def make_symbol_set(m: int, params: ChannelParams, placement="equi_p", prior_policy: str = "uniform",
                    k_out: int = dmc.DEFAULT_K_OUT) -> SymbolSet:
    """Place ``m`` symbols on ``[0, a_max]`` and assign a prior.

    placement: ``"equi_p"`` (activation probabilities equally spaced on
    ``[0, p_max]``), ``"equi_a"`` (equally spaced concentrations) or a
    callable ``(m, params) -> concentrations``.
    prior_policy: ``"uniform"`` or ``"ba_optimized"``, the capacity-achieving
    distribution of the direct channel restricted to the ``m`` symbols.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    conc = _placement(placement, m, params)
    conc[-1] = min(conc[-1], params.a_max)
    if prior_policy == "uniform":
        prior = np.full(m, 1.0 / m)
    elif prior_policy == "ba_optimized":
        ch = dmc.discretize_direct(params, levels=activation_probability(conc, params), k_out=k_out)
        prior = dmc.blahut_arimoto(ch).input_distribution
    else:
        raise ValueError(f"unknown prior policy {prior_policy!r}")
    return SymbolSet(conc, prior, params.a_max)


# ----------------------------------------------------------- observation model


def _moments(conc, params):
    p = activation_probability(conc, params)
    return output_mean(p, params), floored_variance(p, params)


def relay_observation(symbols: SymbolSet, params: ChannelParams, geometry: Geometry):
    """Mean and variance of the relay output for each symbol."""
    return _moments(symbols.concentrations * geometry.r1 / geometry.r2, params)


def receiver_components(symbols: SymbolSet, params: ChannelParams, geometry: Geometry,
                        confusion: ConfusionMatrix | None):
    """Mixture description of the receiver observation.

    Returns ``(means, variances, log_weights)`` of shape ``(m, J)`` where
    ``log_weights[i, j] = log(prior_i R[i, j])``. Without a confusion matrix
    the relay is absent and ``J = 1``.
    """
    a = symbols.concentrations
    with np.errstate(divide="ignore"):
        log_prior = np.log(symbols.prior)
        if confusion is None:
            mean, var = _moments(a, params)
            return mean[:, None], var[:, None], log_prior[:, None]
        c = a * geometry.r1 / geometry.r3
        mean, var = _moments(a[:, None] + c[None, :], params)
        return mean, var, log_prior[:, None] + np.log(confusion.entries)


def _gauss_logpdf(y, mean, var):
    return -0.5 * np.log(2.0 * np.pi * var) - 0.5 * (y - mean) ** 2 / var


def _mixture_log_posteriors(y, means, variances, log_weights):
    """Unnormalized log-posteriors, shape ``y.shape + (m,)``."""
    y = np.asarray(y, dtype=float)[..., None, None]
    return logsumexp(log_weights + _gauss_logpdf(y, means, variances), axis=-1)


def receiver_map_decode(y, symbols: SymbolSet, confusion: ConfusionMatrix | None, params: ChannelParams,
                        geometry: Geometry):
    """MAP estimate of the transmitted symbol from the receiver count ``y``.

    Pass ``confusion=None`` for the direct link without a relay. Ties go to
    the smallest index. Vectorized over ``y``.
    """
    comps = receiver_components(symbols, params, geometry, confusion)
    out = np.argmax(_mixture_log_posteriors(y, *comps), axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def relay_map_decode(y2, symbols: SymbolSet, params: ChannelParams, geometry: Geometry):
    mean, var = relay_observation(symbols, params, geometry)
    with np.errstate(divide="ignore"):
        lp = np.log(symbols.prior) + _gauss_logpdf(np.asarray(y2, dtype=float)[..., None], mean, var)
    out = np.argmax(lp, axis=-1)
    return int(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------------- relay regions


def _quadratic_roots(a, b, c):
    scale = max(abs(a), abs(b), abs(c))
    if scale == 0:
        return []
    a, b, c = a / scale, b / scale, c / scale
    if abs(a) < 1e-14 * max(abs(b), 1e-300):
        return [] if b == 0 else [-c / b]
    disc = b * b - 4.0 * a * c
    if disc < 0:
        return []
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = [q / a]
    if q != 0:
        roots.append(c / q)
    return roots


def gaussian_map_regions(means, variances, log_prior):
    """Exact MAP partition of the real line for single-Gaussian hypotheses.

    Returns ``(edges, labels)``: interval ``k`` is ``(edges[k], edges[k+1]]``
    and decides ``labels[k]``; ``edges`` starts at -inf and ends at +inf.
    """
    means, variances, log_prior = (np.asarray(x, dtype=float) for x in (means, variances, log_prior))
    live = np.flatnonzero(np.isfinite(log_prior))
    roots = []
    for pos, k in enumerate(live):
        for l in live[pos + 1:]:
            vk, vl, mk, ml = variances[k], variances[l], means[k], means[l]
            a = -0.5 / vk + 0.5 / vl
            b = mk / vk - ml / vl
            c = (log_prior[k] - log_prior[l] - 0.5 * math.log(vk / vl)
                 - 0.5 * mk * mk / vk + 0.5 * ml * ml / vl)
            roots.extend(_quadratic_roots(a, b, c))
    roots = np.unique(np.asarray([r for r in roots if np.isfinite(r)], dtype=float))

    def label(y):
        with np.errstate(divide="ignore"):
            return int(np.argmax(log_prior + _gauss_logpdf(y, means, variances)))

    if roots.size == 0:
        return np.array([-np.inf, np.inf]), np.array([label(float(means[live[0]]))])
    span = max(1.0, float(np.ptp(roots)), float(np.max(np.abs(roots))))
    probes = np.concatenate([[roots[0] - span], 0.5 * (roots[1:] + roots[:-1]), [roots[-1] + span]])
    labels = np.array([label(y) for y in probes])
    edges = np.concatenate([[-np.inf], roots, [np.inf]])
    keep = np.concatenate([[True], labels[1:] != labels[:-1]])
    return np.concatenate([edges[:-1][keep], [np.inf]]), labels[keep]


def _interval_masses(lo, hi, mean, sd):
    """Gaussian mass of ``(lo, hi]``, tail-accurate, broadcasting."""
    zl, zh = (lo - mean) / sd, (hi - mean) / sd
    return np.where(zl >= 0, ndtr(-zl) - ndtr(-zh), ndtr(zh) - ndtr(zl))


def relay_confusion(symbols: SymbolSet, params: ChannelParams, geometry: Geometry) -> ConfusionMatrix:
    """``P(relay decodes j | i)`` by integrating each relay Gaussian over the MAP intervals."""
    mean, var = relay_observation(symbols, params, geometry)
    with np.errstate(divide="ignore"):
        edges, labels = gaussian_map_regions(mean, var, np.log(symbols.prior))
    m = symbols.m
    sd = np.sqrt(var)
    mass = _interval_masses(edges[None, :-1], edges[None, 1:], mean[:, None], sd[:, None])
    out = np.zeros((m, m))
    for k, lab in enumerate(labels):
        out[:, lab] += mass[:, k]
    out = np.clip(out, 0.0, None)
    return ConfusionMatrix(out / out.sum(axis=1, keepdims=True))


# ------------------------------------------------------------- Monte Carlo


def _mc_chunk(seq, size, symbols, params, geometry, confusion, relay_moments, rx_comps):
    rng = np.random.default_rng(seq)
    sent = rng.choice(symbols.m, size=size, p=symbols.prior)
    if confusion is None:
        j = np.zeros(size, dtype=int)
    else:
        r_mean, r_var = relay_moments
        y2 = r_mean[sent] + np.sqrt(r_var[sent]) * rng.standard_normal(size)
        j = relay_map_decode(y2, symbols, params, geometry)
    means, variances, _ = rx_comps
    y = means[sent, j] + np.sqrt(variances[sent, j]) * rng.standard_normal(size)
    decided = np.argmax(_mixture_log_posteriors(y, *rx_comps), axis=-1)
    return int(np.count_nonzero(decided != sent))


def error_probability_mc(symbols: SymbolSet, params: ChannelParams, geometry: Geometry, use_relay: bool,
                         trials: int, seed: int, workers: int = 1, chunk_size: int = CHUNK) -> ErrorRateResult:
    """Symbol error rate by simulation with a Wilson 95% interval.

    Trials are split into fixed-size chunks; chunk ``c`` draws from the
    ``c``-th child of ``SeedSequence(seed)``, so the estimate does not
    depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    confusion = relay_confusion(symbols, params, geometry) if use_relay else None
    relay_moments = relay_observation(symbols, params, geometry)
    rx_comps = receiver_components(symbols, params, geometry, confusion)
    n_chunks = -(-trials // chunk_size)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk_size, trials - c * chunk_size) for c in range(n_chunks)]

    def run(c):
        return _mc_chunk(seqs[c], sizes[c], symbols, params, geometry, confusion, relay_moments, rx_comps)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            errors = sum(pool.map(run, range(n_chunks)))
    else:
        errors = sum(run(c) for c in range(n_chunks))
    lo, hi = wilson_interval(errors, trials)
    return ErrorRateResult(errors / trials, "monte_carlo", trials, errors, lo, hi, seed)


# -------------------------------------------------------------- quadrature


def receiver_regions(symbols: SymbolSet, params: ChannelParams, geometry: Geometry,
                     confusion: ConfusionMatrix | None, grid_sigmas: float = 12.0, grid_points: int = 241):
    """Receiver MAP partition ``(edges, labels)`` found by scanning and root bracketing."""
    comps = receiver_components(symbols, params, geometry, confusion)
    means, variances, log_w = comps
    live = np.isfinite(log_w)
    sd = np.sqrt(variances[live])
    z = np.linspace(-grid_sigmas, grid_sigmas, grid_points)
    ys = (means[live][:, None] + sd[:, None] * z[None, :]).ravel()
    lo, hi = ys.min(), ys.max()
    ys = np.unique(np.concatenate([ys, np.linspace(lo, hi, 20_001)]))
    labels = np.argmax(_mixture_log_posteriors(ys, *comps), axis=-1)
    switch = np.flatnonzero(labels[1:] != labels[:-1])

    def diff(y, a, b):
        lp = _mixture_log_posteriors(y, *comps)
        return lp[a] - lp[b]

    roots = []
    for k in switch:
        a, b = labels[k], labels[k + 1]
        roots.append(optimize.brentq(diff, ys[k], ys[k + 1], args=(a, b), xtol=1e-14, rtol=1e-15))
    edges = np.concatenate([[-np.inf], roots, [np.inf]])
    return edges, np.concatenate([labels[:1], labels[switch + 1]])


def error_probability_quadrature(symbols: SymbolSet, params: ChannelParams, geometry: Geometry,
                                 use_relay: bool) -> ErrorRateResult:
    """Symbol error probability by numerical integration over the receiver's MAP regions.

    Each mixture component is integrated with adaptive quadrature over the
    wrong-decision regions clipped to its +-8 sigma support.
    """
    confusion = relay_confusion(symbols, params, geometry) if use_relay else None
    means, variances, log_w = receiver_components(symbols, params, geometry, confusion)
    edges, labels = receiver_regions(symbols, params, geometry, confusion)
    total = 0.0
    for i in range(symbols.m):
        for j in range(means.shape[1]):
            if not np.isfinite(log_w[i, j]):
                continue
            mu, sd = means[i, j], math.sqrt(variances[i, j])
            lo_s, hi_s = mu - QUAD_SIGMAS * sd, mu + QUAD_SIGMAS * sd
            mass = 0.0
            for k, lab in enumerate(labels):
                a, b = max(edges[k], lo_s), min(edges[k + 1], hi_s)
                if lab == i or a >= b:
                    continue
                val, err = integrate.quad(
                    lambda y: math.exp(-0.5 * ((y - mu) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi)),
                    a, b, epsabs=0.0, epsrel=1e-10, limit=200)
                if err > QUAD_RTOL * val + 1e-300:
                    raise IntegrationError(f"quadrature did not converge on ({a}, {b}): {val} +- {err}")
                mass += val
            total += math.exp(log_w[i, j]) * mass
    return ErrorRateResult(min(max(total, 0.0), 1.0), "quadrature")
