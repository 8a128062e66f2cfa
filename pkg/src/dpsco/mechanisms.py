"""Noise primitives and an empirical privacy audit.

All randomness flows through named :class:`RngStream` objects (seed plus
stream id, PCG64 underneath) so any run can be replayed bit for bit.
Noise-scale formulas are tiny but load-bearing: output perturbation adds
per-coordinate Laplace noise of scale

    sigma = 4 L eta sqrt(d) / eps          (pure DP)
    sigma = 4 L eta sqrt(ln(1/delta)) / eps  (approximate DP, Gaussian)

where L is the clip level and eta the regularization step of the phase
whose minimizer is being released.

``empirical_epsilon`` lower-bounds the realized privacy loss of a scalar
mechanism by comparing outcome histograms on two neighboring datasets:
64 equal-width bins over an 8-sigma clamp window, add-one smoothing, and
the maximum absolute log ratio across bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InconclusiveAuditError(RuntimeError):
    """Too little histogram mass to state a privacy-loss estimate."""


@dataclass(frozen=True)
class RngStream:
    """Named random stream: (seed, stream) -> reproducible Generator."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if not (isinstance(self.stream, int) and self.stream >= 0):
            raise ValueError(f"stream must be a nonnegative integer, got {self.stream}")

    def generator(self) -> np.random.Generator:
        """Fresh generator at this stream's initial state (replayable)."""
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(seq))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise ValueError(f"need an RngStream or numpy Generator, got {type(rng).__name__}")


def laplace_vector(sigma: float, d: int, rng) -> np.ndarray:
    """d i.i.d. Laplace(0, sigma) coordinates (std sigma * sqrt(2) each)."""
    if not sigma > 0:
        raise ValueError(f"noise scale must be positive, got {sigma}")
    if not (isinstance(d, int) and d >= 0):
        raise ValueError(f"dimension must be a nonnegative integer, got {d}")
    return as_generator(rng).laplace(0.0, sigma, size=d)


def gaussian_vector(sigma: float, d: int, rng) -> np.ndarray:
    """d i.i.d. N(0, sigma^2) coordinates."""
    if not sigma > 0:
        raise ValueError(f"noise scale must be positive, got {sigma}")
    if not (isinstance(d, int) and d >= 0):
        raise ValueError(f"dimension must be a nonnegative integer, got {d}")
    return as_generator(rng).normal(0.0, sigma, size=d)


def pure_noise_scale(L: float, eta: float, d: int, eps: float) -> float:
    """Laplace scale 4 L eta sqrt(d) / eps for pure-DP output perturbation."""
    if not (L > 0 and eta > 0 and eps > 0):
        raise ValueError(f"L, eta, eps must be positive, got {L}, {eta}, {eps}")
    if not (isinstance(d, int) and d >= 1):
        raise ValueError(f"dimension must be a positive integer, got {d}")
    return 4.0 * L * eta * math.sqrt(d) / eps


def approx_noise_scale(L: float, eta: float, eps: float, delta: float) -> float:
    """Gaussian scale 4 L eta sqrt(ln(1/delta)) / eps for (eps, delta)-DP."""
    if not (L > 0 and eta > 0 and eps > 0):
        raise ValueError(f"L, eta, eps must be positive, got {L}, {eta}, {eps}")
    if not (0 < delta < 1):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return 4.0 * L * eta * math.sqrt(math.log(1.0 / delta)) / eps


@dataclass(frozen=True)
class AuditConfig:
    """Histogram-audit knobs; trials below 10^4 give estimates too noisy
    to act on, so smaller values are rejected outright."""

    trials: int = 10_000
    bins: int = 64
    clamp: tuple[float, float] | None = None

    def __post_init__(self):
        if not (isinstance(self.trials, int) and self.trials >= 10_000):
            raise ValueError(f"trials must be an integer >= 10000, got {self.trials}")
        if not (isinstance(self.bins, int) and self.bins >= 2):
            raise ValueError(f"need at least 2 bins, got {self.bins}")
        if self.clamp is not None and not self.clamp[0] < self.clamp[1]:
            raise ValueError(f"clamp range must be increasing, got {self.clamp}")


def _check_neighbors(data_a, data_b):
    a, b = np.asarray(data_a, dtype=np.float64), np.asarray(data_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"neighboring datasets must share a shape, got {a.shape} vs {b.shape}")
    rows_differ = (
        (a != b).any(axis=tuple(range(1, a.ndim))) if a.ndim > 1 else (a != b)
    )
    if int(rows_differ.sum()) > 1:
        raise ValueError("datasets must differ in at most one element")


def empirical_epsilon(mechanism, data_a, data_b, cfg: AuditConfig, rng) -> float:
    """Histogram lower bound on the privacy loss of a scalar mechanism.

    ``mechanism(data, generator) -> float`` is run cfg.trials times on
    each dataset with a shared generator. Raises InconclusiveAuditError
    when the outcomes concentrate in fewer than two bins (no ratio to
    measure).
    """
    _check_neighbors(data_a, data_b)
    gen = as_generator(rng)
    out_a = np.fromiter((mechanism(data_a, gen) for _ in range(cfg.trials)), np.float64, cfg.trials)
    out_b = np.fromiter((mechanism(data_b, gen) for _ in range(cfg.trials)), np.float64, cfg.trials)
    if cfg.clamp is not None:
        lo, hi = cfg.clamp
    else:
        mid, spread = float(out_a.mean()), float(out_a.std())
        if spread == 0.0:
            raise InconclusiveAuditError("outcomes on the first dataset are constant")
        lo, hi = mid - 8.0 * spread, mid + 8.0 * spread
    edges = np.linspace(lo, hi, cfg.bins + 1)
    counts_a, _ = np.histogram(np.clip(out_a, lo, hi), bins=edges)
    counts_b, _ = np.histogram(np.clip(out_b, lo, hi), bins=edges)
    occupied = int(((counts_a + counts_b) > 0).sum())
    if occupied < 2:
        raise InconclusiveAuditError(f"outcomes landed in {occupied} bin(s); widen the clamp")
    # add-one smoothing keeps empty bins from producing infinite ratios
    p_a = (counts_a + 1.0) / (cfg.trials + cfg.bins)
    p_b = (counts_b + 1.0) / (cfg.trials + cfg.bins)
    return float(np.abs(np.log(p_a / p_b)).max())
