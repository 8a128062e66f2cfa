"""Loss families and their Lipschitzian extensions.

Three convex per-sample losses, each with closed-form value, gradient,
and L-Lipschitz extension

    f_L(x) = inf_y  f(y) + L * ||x - y||,

which agrees with f wherever ||grad f|| <= L and continues it with slope
exactly L elsewhere. The extension gradient is grad f(x) when
||grad f(x)|| <= L (including the boundary case of equality) and
L * (x - y(x)) / ||x - y(x)|| otherwise, where y(x) attains the infimum.

Families:

* ``QuadraticAnchor(H)``: f(x; s) = (H/2) ||x - s||^2. Extension is the
  Huber function of the distance to the anchor.
* ``IndicatorQuadratic(H)``: same, except the all-zero payload switches
  the sample off (loss identically 0).
* ``SmoothedHingeMargin(margin, tau)``: f(x; (a, y)) = psi(margin -
  y <a, x>) with psi(u) = 0 for u <= 0, u^2/(2 tau) on (0, tau], and
  u - tau/2 beyond. Margin-satisfied points pay nothing.

Batch variants operate on an (n, d) payload array at once; they are the
only code path the solvers use, so clipping is done with a mask and the
input array is returned untouched when no row clips (runs with a slack
clip bound stay bitwise identical to unclipped runs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Vector, as_point


@dataclass(frozen=True)
class QuadraticAnchor:
    """Isotropic quadratic pulled toward a per-sample anchor point."""

    H: float

    def __post_init__(self):
        if not (self.H > 0 and math.isfinite(self.H)):
            raise ValueError(f"curvature H must be positive, got {self.H}")


@dataclass(frozen=True)
class IndicatorQuadratic:
    """Quadratic anchor loss gated by a nonzero payload."""

    H: float

    def __post_init__(self):
        if not (self.H > 0 and math.isfinite(self.H)):
            raise ValueError(f"curvature H must be positive, got {self.H}")


@dataclass(frozen=True)
class SmoothedHingeMargin:
    """Margin loss with a quadratically smoothed hinge corner.

    tau defaults to margin / 2; the smoothed corner keeps per-sample
    smoothness ||a||^2 / tau finite.
    """

    margin: float
    tau: float = -1.0  # sentinel; replaced by margin / 2 in __post_init__

    def __post_init__(self):
        if not (self.margin > 0 and math.isfinite(self.margin)):
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.tau == -1.0:
            object.__setattr__(self, "tau", self.margin / 2.0)
        if not (0 < self.tau and math.isfinite(self.tau)):
            raise ValueError(f"smoothing width tau must be positive, got {self.tau}")


LossFamily = QuadraticAnchor | IndicatorQuadratic | SmoothedHingeMargin

FAMILY_TAGS = {
    QuadraticAnchor: "quadratic-anchor",
    IndicatorQuadratic: "indicator-quadratic",
    SmoothedHingeMargin: "smoothed-hinge-margin",
}


@dataclass(frozen=True)
class ExtensionQuery:
    """One extension evaluation: query point, sample payload, clip level."""

    x: Vector
    payload: Vector
    clipL: float
    label: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", as_point(self.x))
        object.__setattr__(self, "payload", as_point(self.payload, self.x.shape[0]))
        if not self.clipL > 0:
            raise ValueError(f"clip level must be positive, got {self.clipL}")


def _require_label(family, label):
    if isinstance(family, SmoothedHingeMargin):
        if label is None:
            raise ValueError("hinge samples need a +/-1 label")
        return float(label)
    if label is not None:
        raise ValueError(f"{type(family).__name__} samples carry no label")
    return None


# -- single-sample values and gradients ------------------------------------


def loss_value(family: LossFamily, x, payload, label=None) -> float:
    x = as_point(x)
    payload = as_point(payload, x.shape[0])
    label = _require_label(family, label)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if isinstance(family, IndicatorQuadratic) and not payload.any():
            return 0.0
        diff = x - payload
        return 0.5 * family.H * float(diff @ diff)
    u = family.margin - label * float(payload @ x)
    return _psi(u, family.tau)


def loss_gradient(family: LossFamily, x, payload, label=None) -> Vector:
    x = as_point(x)
    payload = as_point(payload, x.shape[0])
    label = _require_label(family, label)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if isinstance(family, IndicatorQuadratic) and not payload.any():
            return np.zeros_like(x)
        return family.H * (x - payload)
    u = family.margin - label * float(payload @ x)
    return -_psi_slope(u, family.tau) * label * payload


def _psi(u: float, tau: float) -> float:
    if u <= 0:
        return 0.0
    if u <= tau:
        return u * u / (2.0 * tau)
    return u - tau / 2.0


def _psi_slope(u: float, tau: float) -> float:
    if u <= 0:
        return 0.0
    if u <= tau:
        return u / tau
    return 1.0


# -- Lipschitzian extension -------------------------------------------------


def lip_ext_value(family: LossFamily, query: ExtensionQuery) -> float:
    x, s, L = query.x, query.payload, query.clipL
    label = _require_label(family, query.label)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if isinstance(family, IndicatorQuadratic) and not s.any():
            return 0.0
        H = family.H
        r = float(np.linalg.norm(x - s))
        if H * r <= L:
            return 0.5 * H * r * r
        return L * r - L * L / (2.0 * H)
    u = family.margin - label * float(s @ x)
    a_norm = float(np.linalg.norm(s))
    if a_norm == 0.0:
        return _psi(u, family.tau)
    c = L / a_norm
    tau = family.tau
    if c >= 1.0 or u <= c * tau:
        return _psi(u, tau)
    # slope of psi caps at c from u = c*tau onward
    return c * u - c * c * tau / 2.0


def lip_ext_gradient(family: LossFamily, query: ExtensionQuery) -> Vector:
    """Gradient of the extension; norm never exceeds the clip level.

    Where ||grad f(x)|| <= clipL (equality included) this is exactly
    grad f(x), bit for bit.
    """
    x, s, L = query.x, query.payload, query.clipL
    label = _require_label(family, query.label)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if isinstance(family, IndicatorQuadratic) and not s.any():
            return np.zeros_like(x)
        H = family.H
        diff = x - s
        r = float(np.linalg.norm(diff))
        if H * r <= L:
            return H * diff
        return (L / r) * diff
    u = family.margin - label * float(s @ x)
    a_norm = float(np.linalg.norm(s))
    slope = _psi_slope(u, family.tau)
    if a_norm > 0.0:
        slope = min(slope, L / a_norm)
    return -slope * label * s


def lip_ext_argmin(family: LossFamily, query: ExtensionQuery) -> Vector:
    """A point y(x) attaining inf_y f(y) + L ||x - y||."""
    x, s, L = query.x, query.payload, query.clipL
    label = _require_label(family, query.label)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if isinstance(family, IndicatorQuadratic) and not s.any():
            return x.copy()
        H = family.H
        diff = x - s
        r = float(np.linalg.norm(diff))
        if H * r <= L:
            return x.copy()
        return s + (L / (H * r)) * diff
    u = family.margin - label * float(s @ x)
    a_norm = float(np.linalg.norm(s))
    if a_norm == 0.0:
        return x.copy()
    c = L / a_norm
    tau = family.tau
    if c >= 1.0 or u <= c * tau:
        return x.copy()
    # walk against the margin gradient until the slope drops to c
    return x + ((u - c * tau) / (a_norm * a_norm)) * label * s


# -- batch interface --------------------------------------------------------


def batch_values(family: LossFamily, x, points: np.ndarray, labels=None) -> np.ndarray:
    x = as_point(x)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if labels is not None:
            raise ValueError(f"{type(family).__name__} samples carry no label")
        diff = x[None, :] - points
        vals = 0.5 * family.H * np.einsum("ij,ij->i", diff, diff)
        if isinstance(family, IndicatorQuadratic):
            vals = np.where(points.any(axis=1), vals, 0.0)
        return vals
    if labels is None:
        raise ValueError("hinge samples need +/-1 labels")
    u = family.margin - labels * (points @ x)
    tau = family.tau
    quad = u * u / (2.0 * tau)
    lin = u - tau / 2.0
    return np.where(u <= 0, 0.0, np.where(u <= tau, quad, lin))


def batch_gradients(family: LossFamily, x, points: np.ndarray, labels=None) -> np.ndarray:
    x = as_point(x)
    if isinstance(family, (QuadraticAnchor, IndicatorQuadratic)):
        if labels is not None:
            raise ValueError(f"{type(family).__name__} samples carry no label")
        grads = family.H * (x[None, :] - points)
        if isinstance(family, IndicatorQuadratic):
            grads[~points.any(axis=1)] = 0.0
        return grads
    if labels is None:
        raise ValueError("hinge samples need +/-1 labels")
    u = family.margin - labels * (points @ x)
    slope = np.clip(u / family.tau, 0.0, 1.0)
    return (-slope * labels)[:, None] * points


def clip_gradients(grads: np.ndarray, clip: float) -> tuple[np.ndarray, np.ndarray]:
    """Scale rows with norm above ``clip`` back onto the clip sphere.

    Returns (gradients, consumed norms). The input array is returned
    as-is when nothing clips, so a slack clip level leaves downstream
    arithmetic bitwise unchanged. Consumed norms are recomputed from the
    returned rows, not assumed.
    """
    norms = np.linalg.norm(grads, axis=1)
    if not math.isfinite(clip):
        return grads, norms
    mask = norms > clip
    if not mask.any():
        return grads, norms
    out = grads.copy()
    out[mask] *= (clip / norms[mask])[:, None]
    consumed = norms.copy()
    consumed[mask] = np.linalg.norm(out[mask], axis=1)
    return out, consumed


def batch_ext_gradients(
    family: LossFamily, x, points: np.ndarray, labels, clip: float
) -> tuple[np.ndarray, np.ndarray]:
    """Extension gradients for a payload block: gradients then mask-clip."""
    grads = batch_gradients(family, x, points, labels)
    return clip_gradients(grads, clip)


def effective_lipschitz(constants, ball, *, interpolating: bool) -> float:
    """Lipschitz bound to hand a solver confined to ``ball``.

    Under interpolation every per-sample gradient at distance r from the
    shared minimizer has norm at most H * r, so H * diameter bounds all
    gradients seen inside the ball; otherwise only the declared global
    constant is safe.
    """
    if interpolating:
        return constants.H * ball.diameter
    return constants.L
