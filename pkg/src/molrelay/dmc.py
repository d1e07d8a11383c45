"""Discretized channels and Blahut-Arimoto capacity.

The continuous channel has an output standard deviation proportional to
``p (1 - p)``, so it is almost noiseless near ``p = 0`` and ``p = 1``. A
uniform grid in ``p`` wastes resolution in the middle and starves the
ends, so both the input levels and the output bin edges are laid out
uniformly in the variance-stabilizing coordinate

    u(p) = integral_0^p dt / max(c t (1 - t), s_floor),   c = sqrt(n) N sigma0

which is piecewise linear/logit and has a closed-form inverse. One unit
of ``u`` spans a fixed fraction of the local output noise everywhere.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit, ndtr

from .channel import ChannelParams, output_variance, variance_floor

LN2 = math.log(2.0)
UNDERFLOW = 1e-300
TAIL_SIGMAS = 8.0
DEFAULT_K_IN = 101
DEFAULT_K_OUT = 1501
DEFAULT_K_OUT_PAIR = 101
DEFAULT_K_SPREAD = 32
MAX_CELLS = 20_000_000  # k_in * n_columns, about 160 MB of float64


class InvalidChannelError(ValueError):
    pass


class ChannelSizeError(MemoryError):
    """Requested joint discretization exceeds the cell budget."""


@dataclass(frozen=True, eq=False)
class DiscreteChannel:
    """Finite channel ``transition[x, y] = P(y | input_levels[x])``.

    ``output_bins`` holds one array of bin edges per output axis; the outer
    edges are infinite. Joint channels flatten the product grid row-major
    (axis 0 slowest).
    """

    input_levels: np.ndarray
    output_bins: tuple
    transition: np.ndarray
    kind: str = "direct"

    def __post_init__(self):
        for arr in (self.input_levels, self.transition, *self.output_bins):
            arr.setflags(write=False)

    @property
    def shape(self):
        return self.transition.shape

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "input_levels": self.input_levels.tolist(),
            "output_bins": [edges.tolist() for edges in self.output_bins],
            "transition": self.transition.tolist(),
        }


@dataclass(frozen=True, eq=False)
class CapacityResult:
    capacity_bits: float
    input_distribution: np.ndarray
    iterations: int
    converged: bool
    gap_bound: float
    history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "capacity_bits": self.capacity_bits,
            "input_distribution": self.input_distribution.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "gap_bound": self.gap_bound,
        }


def dump_json(obj, path) -> None:
    """Debug dump of a :class:`DiscreteChannel` or :class:`CapacityResult`."""
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh)


# ---------------------------------------------------------------- coordinates


class _Stabilizer:
    """Closed-form ``u(p)`` and its inverse for one parameter set."""

    def __init__(self, params: ChannelParams):
        self.s_floor = math.sqrt(variance_floor(params))
        self.c = math.sqrt(params.n) * params.n_receptors * math.sqrt(params.sigma0_sq)
        eps = self.s_floor / self.c if self.c > 0 else math.inf
        if eps >= 0.25:
            self.t_lo = self.t_hi = None
        else:
            self.t_lo = 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * eps))
            self.t_hi = 1.0 - self.t_lo
            self.u_lo = self.t_lo / self.s_floor
            self.u_hi = self.u_lo + (logit(self.t_hi) - logit(self.t_lo)) / self.c

    def width(self, p):
        """Local noise scale ``max(c p (1-p), s_floor)``."""
        return np.maximum(self.c * p * (1.0 - p), self.s_floor)

    def u(self, p):
        p = np.asarray(p, dtype=float)
        if self.t_lo is None:
            return p / self.s_floor
        mid = np.clip(p, self.t_lo, self.t_hi)
        out = np.where(p <= self.t_lo, p / self.s_floor, self.u_lo + (logit(mid) - logit(self.t_lo)) / self.c)
        return np.where(p > self.t_hi, self.u_hi + (p - self.t_hi) / self.s_floor, out)

    def u_inv(self, u):
        u = np.asarray(u, dtype=float)
        if self.t_lo is None:
            return u * self.s_floor
        mid = expit(logit(self.t_lo) + self.c * (np.clip(u, self.u_lo, self.u_hi) - self.u_lo))
        out = np.where(u <= self.u_lo, u * self.s_floor, mid)
        return np.where(u > self.u_hi, self.t_hi + (u - self.u_hi) * self.s_floor, out)


def input_grid(params: ChannelParams, k_in: int = DEFAULT_K_IN, p_max: float | None = None) -> np.ndarray:
    """``k_in`` activation levels on ``[0, p_max]``, uniform in the stabilized coordinate.

    Both endpoints are included exactly.
    """
    if k_in < 2:
        raise ValueError(f"k_in must be >= 2, got {k_in}")
    if p_max is None:
        p_max = params.p_max
    st = _Stabilizer(params)
    levels = st.u_inv(np.linspace(0.0, float(st.u(p_max)), k_in))
    levels[0], levels[-1] = 0.0, p_max
    levels = np.maximum.accumulate(levels)
    if np.any(np.diff(levels) <= 0):
        raise ValueError("input grid is not strictly increasing; reduce k_in")
    return levels


def _output_edges(st: _Stabilizer, levels, mean, sd, scale, k_out):
    """Bin edges with width proportional to the local output noise."""
    p_top = float(levels[-1])
    u_top = float(st.u(p_top))
    w_top = float(st.width(p_top))

    def v(y):  # stabilized output coordinate, linear outside [0, scale * p_top]
        p = y / scale
        base = st.u(np.clip(p, 0.0, p_top))
        return base + np.minimum(p, 0.0) / st.s_floor + np.maximum(p - p_top, 0.0) / w_top

    def v_inv(w):
        p = np.where(w < 0, w * st.s_floor, st.u_inv(np.clip(w, 0.0, u_top)))
        p = np.where(w > u_top, p_top + (w - u_top) * w_top, p)
        return p * scale

    y_lo = float(np.min(mean - TAIL_SIGMAS * sd))
    y_hi = float(np.max(mean + TAIL_SIGMAS * sd))
    inner = v_inv(np.linspace(v(y_lo), v(y_hi), k_out + 1)[1:-1])
    edges = np.concatenate([[-np.inf], inner, [np.inf]])
    if np.any(np.diff(edges) <= 0):
        raise ValueError("output bins are not strictly increasing; reduce k_out")
    return edges


def gaussian_bin_masses(edges, mean, sd):
    """``P(edges[k] < Y <= edges[k+1])`` for each row's Gaussian, tail-accurate."""
    z = (edges[None, :] - mean[:, None]) / sd[:, None]
    lower = ndtr(z)
    upper = ndtr(-z)
    left = np.diff(lower, axis=1)
    right = -np.diff(upper, axis=1)
    # use survival differences right of the mean to avoid cancellation
    return np.where(z[:, :-1] >= 0, right, left)


def _normalize_rows(t):
    t = np.clip(t, 0.0, None)
    t[t < UNDERFLOW] = 0.0
    return t / t.sum(axis=1, keepdims=True)


def _gaussian_channel(params, levels, k_out, mean_gain=1.0, var_gain=1.0, kind="direct"):
    if k_out < 2:
        raise ValueError(f"k_out must be >= 2, got {k_out}")
    levels = np.asarray(levels, dtype=float)
    scale = mean_gain * params.total_receptors
    mean = scale * levels
    sd = np.sqrt(var_gain * np.maximum(output_variance(levels, params), variance_floor(params)))
    edges = _output_edges(_Stabilizer(params), levels, mean, sd, scale, k_out)
    return DiscreteChannel(levels.copy(), (edges,), _normalize_rows(gaussian_bin_masses(edges, mean, sd)), kind)


def _levels(params, k_in, levels):
    if levels is None:
        return input_grid(params, k_in)
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 1 or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be a strictly increasing 1-D sequence")
    if levels[0] < 0 or levels[-1] > 1:
        raise ValueError("levels must lie in [0, 1]")
    return levels


def discretize_direct(params: ChannelParams, k_in: int = DEFAULT_K_IN, k_out: int = DEFAULT_K_OUT, *,
                      levels=None, var_scale: float = 1.0) -> DiscreteChannel:
    """Single-output channel: count ``Y ~ N(nNp, n N^2 p^2 (1-p)^2 sigma0^2)``.

    ``levels`` overrides the default input grid; ``var_scale`` inflates the
    output variance (used for the optional relay-noise model).
    """
    return _gaussian_channel(params, _levels(params, k_in, levels), k_out, var_gain=var_scale)


def discretize_sum(params: ChannelParams, k_in: int = DEFAULT_K_IN, k_out: int = DEFAULT_K_OUT, *,
                   levels=None) -> DiscreteChannel:
    """Combined output ``Y1 + Y2`` with mean ``2nNp`` and variance ``2 n N^2 p^2 (1-p)^2 sigma0^2``."""
    return _gaussian_channel(params, _levels(params, k_in, levels), k_out, 2.0, 2.0, kind="sum")


def discretize_joint(params: ChannelParams, k_in: int = DEFAULT_K_IN, k_out: int | None = None, *,
                     coords: str = "pair", k_spread: int = DEFAULT_K_SPREAD, levels=None,
                     max_cells: int = MAX_CELLS) -> DiscreteChannel:
    """Two conditionally independent outputs sharing the input ``p``.

    ``coords="pair"`` bins ``(Y1, Y2)`` on the product of the single-output
    grid with itself (``k_out`` bins per axis). ``coords="sum_diff"`` bins
    the rotated pair ``(Y1 + Y2, |Y1 - Y2|)`` instead: for Gaussian outputs
    with equal conditional moments these two coordinates are independent
    given ``p``, the map loses no information, and the sum axis reuses the
    :func:`discretize_sum` grid so that channel is an exact marginal.
    ``k_spread`` is the number of log-spaced bins on ``|Y1 - Y2|``.
    ``k_out`` defaults to 101 per axis for ``"pair"`` and to the
    single-output default for ``"sum_diff"``.

    Raises :class:`ChannelSizeError` when ``k_in * columns > max_cells``.
    """
    levels = _levels(params, k_in, levels)
    if k_out is None:
        k_out = DEFAULT_K_OUT_PAIR if coords == "pair" else DEFAULT_K_OUT
    n_cols = k_out * k_out if coords == "pair" else k_out * k_spread
    if coords not in ("pair", "sum_diff"):
        raise ValueError(f"unknown coords {coords!r}")
    if levels.size * n_cols > max_cells:
        raise ChannelSizeError(
            f"joint channel needs {levels.size} x {n_cols} cells, budget is {max_cells}")

    if coords == "pair":
        single = _gaussian_channel(params, levels, k_out)
        t = single.transition
        joint = (t[:, :, None] * t[:, None, :]).reshape(levels.size, -1)
        return DiscreteChannel(levels.copy(), single.output_bins * 2, _normalize_rows(joint), "joint")

    if k_spread < 2:
        raise ValueError(f"k_spread must be >= 2, got {k_spread}")
    summed = _gaussian_channel(params, levels, k_out, 2.0, 2.0)
    # Y1 - Y2 ~ N(0, 2 var); bins on |Y1 - Y2| are log-spaced
    scale = np.sqrt(2.0 * np.maximum(output_variance(levels, params), variance_floor(params)))
    d_edges = np.exp(np.linspace(math.log(scale.min() * 1e-3), math.log(scale.max() * TAIL_SIGMAS), k_spread + 1))
    d_edges[0], d_edges[-1] = 0.0, np.inf
    spread = _normalize_rows(gaussian_bin_masses(d_edges, np.zeros_like(scale), scale) * 2.0)
    joint = (summed.transition[:, :, None] * spread[:, None, :]).reshape(levels.size, -1)
    return DiscreteChannel(levels.copy(), (summed.output_bins[0], d_edges), _normalize_rows(joint), "joint_sum_diff")


# ------------------------------------------------------------ Blahut-Arimoto


def _as_matrix(channel) -> np.ndarray:
    t = channel.transition if isinstance(channel, DiscreteChannel) else np.asarray(channel, dtype=float)
    if t.ndim != 2 or t.shape[0] < 1 or t.shape[1] < 1:
        raise InvalidChannelError("transition must be a non-empty 2-D matrix")
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise InvalidChannelError("transition entries must be finite and >= 0")
    sums = t.sum(axis=1)
    if np.any(sums == 0):
        raise InvalidChannelError(f"rows {np.flatnonzero(sums == 0).tolist()} are all zero")
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise InvalidChannelError("rows must sum to 1 within 1e-9")
    return t


def mutual_information(channel, input_distribution) -> float:
    """``I(X; Y)`` in bits for a given input distribution."""
    t = _as_matrix(channel)
    r = np.asarray(input_distribution, dtype=float)
    q = r @ t
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(t > 0, t * (np.log(t) - np.log(np.where(q > 0, q, 1.0))), 0.0)
    return float(r @ terms.sum(axis=1)) / LN2


class _BA:
    def __init__(self, t):
        self.t = t
        with np.errstate(divide="ignore", invalid="ignore"):
            self.neg_entropy = np.where(t > 0, t * np.log(t), 0.0).sum(axis=1)

    def divergences(self, r):
        """Per-input ``D(T_x || rT)`` in nats and the lower bound ``r . D``."""
        q = r @ self.t
        d = self.neg_entropy - self.t @ np.log(np.maximum(q, UNDERFLOW))
        return d, float(r @ d)

    @staticmethod
    def step(r, d):
        r = r * np.exp(d - d.max())
        return r / r.sum()


def blahut_arimoto(channel, tol_bits: float = 1e-6, max_iter: int = 20_000, *, init=None,
                   accelerate: bool = True, record_history: bool = False) -> CapacityResult:
    """Capacity of a finite channel by Blahut-Arimoto.

    Stops once the duality gap ``max_x D(T_x || q) - I`` drops to
    ``tol_bits``. With ``accelerate`` each iteration is a SQUAREM cycle:
    two plain updates plus an extrapolated point that is kept only if it
    does not lower the mutual information, so the lower bound stays
    non-decreasing either way. ``init`` warm-starts the input distribution.
    """
    if not tol_bits > 0:
        raise ValueError("tol_bits must be > 0")
    t = _as_matrix(channel)
    k = t.shape[0]
    if init is None:
        r = np.full(k, 1.0 / k)
    else:
        r = np.asarray(init, dtype=float).copy()
        if r.shape != (k,) or np.any(r < 0) or r.sum() <= 0:
            raise ValueError("init must be a non-negative vector with one entry per input")
        r /= r.sum()
    ba = _BA(t)
    d, lower = ba.divergences(r)
    history = [lower / LN2] if record_history else None
    tol = tol_bits * LN2
    it = 0
    while d.max() - lower > tol and it < max_iter:
        it += 1
        r1 = ba.step(r, d)
        d1, low1 = ba.divergences(r1)
        if not accelerate or d1.max() - low1 <= tol:
            r_new, d_new, low_new = r1, d1, low1
        else:
            r2 = ba.step(r1, d1)
            d2, low2 = ba.divergences(r2)
            r_new, d_new, low_new = r2, d2, low2
            delta = r1 - r
            curve = r2 - 2.0 * r1 + r
            norm_c = np.linalg.norm(curve)
            alpha = -np.linalg.norm(delta) / norm_c if norm_c > 0 else -1.0
            while alpha < -1.0:
                rx = np.maximum(r - 2.0 * alpha * delta + alpha * alpha * curve, 0.0)
                rx /= rx.sum()
                dx, lowx = ba.divergences(rx)
                if lowx >= low2:
                    r_new, d_new, low_new = rx, dx, lowx
                    break
                alpha = 0.5 * (alpha - 1.0)
                if alpha > -1.01:
                    break
        # BA lower bound never decreases (rounding slack only)
        assert low_new >= lower - 1e-12 * max(1.0, abs(lower)), (low_new, lower)
        r, d, lower = r_new, d_new, low_new
        if record_history:
            history.append(lower / LN2)
    gap = max(float(d.max() - lower), 0.0) / LN2
    return CapacityResult(
        capacity_bits=max(lower, 0.0) / LN2,
        input_distribution=r,
        iterations=it,
        converged=gap <= tol_bits,
        gap_bound=gap,
        history=tuple(history) if record_history else (),
    )
