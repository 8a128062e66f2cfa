"""Hard-instance generators and certified oracle checks.

Generators produce :class:`Instance` objects with honest declared
constants and, for the interpolating ones, a certificate that every
per-sample gradient vanishes at the optimum. Oracles measure what a
construction actually delivers (minimizer shift, stability, growth after
removals, pinched-minimizer location) against the closed-form bounds it
is supposed to satisfy, and say so in small report objects.

All quadratic-family oracles exploit that per-sample Hessians are
isotropic (c * I with c = H or 0), which makes adversarial choices exact
rather than greedy: the worst r-sample removal for growth drops the r
largest curvature contributions, and the worst k-sample replacement for
the minimizer shift swaps the k smallest (or largest) anchors for the
domain-boundary anchor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ball, Vector, as_point
from .losses import IndicatorQuadratic, QuadraticAnchor, SmoothedHingeMargin
from .mechanisms import as_generator
from .problems import (
    Dataset,
    Instance,
    LossConstants,
    Optimum,
    exact_minimizer,
    interpolation_certificate,
    is_interpolating,
)

# -- parameter records -------------------------------------------------------


@dataclass(frozen=True)
class LowerBoundSpec:
    """Indicator-quadratic lower-bound construction: n - k off samples,
    k samples anchored at v."""

    d: int
    n: int
    k: int
    v: Vector
    H: float

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not (isinstance(self.k, int) and 1 <= self.k <= self.n):
            raise ValueError(f"k must satisfy 1 <= k <= n, got {self.k}")
        object.__setattr__(self, "v", as_point(self.v, self.d))
        if not self.v.any():
            raise ValueError("v must be nonzero (the zero payload is the off state)")
        self.v.setflags(write=False)
        if not self.H > 0:
            raise ValueError(f"H must be positive, got {self.H}")


@dataclass(frozen=True)
class PackingSpec:
    """Axis-grid packing of the ball of diameter D at separation gamma."""

    D: float
    gamma: float
    d: int

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")
        if not (0 < self.gamma <= self.D / 2):
            raise ValueError(f"gamma must lie in (0, D/2], got {self.gamma}")
        if not (isinstance(self.d, int) and 1 <= self.d <= 3):
            raise ValueError(f"packing supports d in 1..3, got {self.d}")


@dataclass(frozen=True)
class SuperefficiencyParams:
    """Replacement attack on an interpolating base: drop the last r
    samples, append r anchors at +anchor. t, c0, c1 record the claimed
    superefficiency rate (excess <= c0 exp(-c1 n^t)) being traded away."""

    r: int
    anchor: float
    t: float = 1.0
    c0: float = 1.0
    c1: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.r, int) and self.r >= 1):
            raise ValueError(f"removal count r must be a positive integer, got {self.r}")
        if not (0 < self.t <= 1):
            raise ValueError(f"t must lie in (0, 1], got {self.t}")
        if not (self.c0 > 0 and self.c1 > 0):
            raise ValueError("rate constants c0, c1 must be positive")

    @classmethod
    def from_epsilon(cls, eps: float, anchor: float, **kwargs) -> "SuperefficiencyParams":
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        return cls(r=math.ceil(1.0 / eps), anchor=anchor, **kwargs)


# -- generators --------------------------------------------------------------


def make_noiseless_least_squares(
    d: int, n: int, xstar, H: float, rng=None, radius: float | None = None
) -> Instance:
    """Interpolating least squares: every anchor sits exactly at xstar.

    Population risk (H/2)||x - xstar||^2, so the growth coefficient is
    exactly H. Deterministic; rng is accepted for API uniformity with
    the other generators and never consumed.
    """
    xstar = as_point(xstar, d)
    R = float(radius) if radius is not None else max(1.0, 2.0 * float(np.linalg.norm(xstar)))
    domain = Ball(np.zeros(d), R)
    if not domain.contains(xstar):
        raise ValueError("xstar must lie inside the domain ball")
    points = np.tile(xstar, (n, 1))
    L = H * (float(np.linalg.norm(xstar)) + R)
    inst = Instance(
        family=QuadraticAnchor(H),
        dataset=Dataset(points),
        domain=domain,
        constants=LossConstants(L=L, H=H, growth=H, kappa=2.0, kappa_floor=2.0),
        optimum=Optimum(xstar),
    )
    assert interpolation_certificate(inst) == 0.0
    return inst


def make_noisy_least_squares(
    d: int, n: int, xstar, H: float, noise_std: float, rng, radius: float | None = None
) -> Instance:
    """Least squares with anchors xstar + noise_std * N(0, I): no longer
    interpolating, but still H-growth around the anchor mean."""
    xstar = as_point(xstar, d)
    if not noise_std > 0:
        raise ValueError(f"noise_std must be positive, got {noise_std}")
    gen = as_generator(rng)
    points = xstar[None, :] + noise_std * gen.standard_normal((n, d))
    mean = points.mean(axis=0)
    R = (
        float(radius)
        if radius is not None
        else max(1.0, 2.0 * float(np.linalg.norm(xstar)) + 4.0 * noise_std)
    )
    domain = Ball(np.zeros(d), R)
    if not domain.contains(mean):
        raise ValueError("anchor mean fell outside the domain; enlarge the radius")
    L = H * (float(np.linalg.norm(points, axis=1).max()) + R)
    return Instance(
        family=QuadraticAnchor(H),
        dataset=Dataset(points),
        domain=domain,
        constants=LossConstants(L=L, H=H, growth=H, kappa=2.0, kappa_floor=2.0),
        optimum=Optimum(mean),
    )


def make_margin_classification(d: int, n: int, margin: float, rng) -> Instance:
    """Separable margin classification with a slack-3/2 witness.

    Every unit-norm feature satisfies |<a, witness>| >= 1.5 * margin and
    labels agree with the sign, so the witness classifies with margin to
    spare: moves of margin/2 along any feature direction keep every
    sample loss at zero.
    """
    if not margin > 0:
        raise ValueError(f"margin must be positive, got {margin}")
    gen = as_generator(rng)
    direction = gen.standard_normal(d)
    direction /= np.linalg.norm(direction)
    witness = 2.0 * margin * math.sqrt(d) * direction
    rows = []
    labels = []
    while len(rows) < n:
        a = gen.standard_normal(d)
        norm = float(np.linalg.norm(a))
        if norm < 1e-12:
            continue
        a /= norm
        score = float(a @ witness)
        if abs(score) < 1.5 * margin:
            continue  # too close to the boundary; resample
        rows.append(a)
        labels.append(1.0 if score > 0 else -1.0)
    family = SmoothedHingeMargin(margin)
    H = 1.0 / family.tau  # max ||a||^2 / tau at unit-norm features
    inst = Instance(
        family=family,
        dataset=Dataset(np.array(rows), np.array(labels)),
        domain=Ball(np.zeros(d), 2.0 * float(np.linalg.norm(witness))),
        constants=LossConstants(L=1.0, H=H, growth=0.0, kappa=2.0, kappa_floor=2.0),
        optimum=Optimum(witness),
    )
    assert interpolation_certificate(inst) == 0.0
    return inst


def make_lower_bound_instance(spec: LowerBoundSpec, radius: float | None = None) -> Instance:
    """n - k off samples followed by k samples anchored at v.

    Population risk is (k H / 2n) ||x - v||^2: interpolating, with
    growth coefficient exactly k H / n.
    """
    points = np.zeros((spec.n, spec.d))
    points[spec.n - spec.k :] = spec.v
    R = float(radius) if radius is not None else max(1.0, 2.0 * float(np.linalg.norm(spec.v)))
    domain = Ball(np.zeros(spec.d), R)
    if not domain.contains(spec.v):
        raise ValueError("v must lie inside the domain ball")
    L = spec.H * (float(np.linalg.norm(spec.v)) + R)
    inst = Instance(
        family=IndicatorQuadratic(spec.H),
        dataset=Dataset(points),
        domain=domain,
        constants=LossConstants(
            L=L, H=spec.H, growth=spec.k * spec.H / spec.n, kappa=2.0, kappa_floor=2.0
        ),
        optimum=Optimum(spec.v),
    )
    assert interpolation_certificate(inst) == 0.0
    return inst


def make_packing(spec: PackingSpec) -> np.ndarray:
    """Axis-aligned gamma-grid inside the centered ball of diameter D.

    Points are gamma * z for integer vectors z with norm at most D/2
    (boundary included), in lexicographic order. Pairwise separation is
    exactly gamma along each axis; the 1-D count is 2*floor(D/(2 gamma))
    + 1 >= D / (2 gamma).
    """
    half = spec.D / 2.0
    reach = int(math.floor(half / spec.gamma + 1e-12))
    axis = np.arange(-reach, reach + 1, dtype=np.float64) * spec.gamma
    grids = np.meshgrid(*([axis] * spec.d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    keep = np.linalg.norm(pts, axis=1) <= half + 1e-12
    return pts[keep]


# -- oracle reports ----------------------------------------------------------


@dataclass(frozen=True)
class SuperefficiencyReport:
    instance: Instance
    shift: float
    lower_bound: float
    upper_bound: float
    passed: bool
    base_minimizer: float
    params: SuperefficiencyParams


@dataclass(frozen=True)
class ModulusReport:
    """Certified minimizer-shift lower bounds omega(0..k) over the
    boundary-anchor replacement family."""

    values: tuple[float, ...]
    anchor_magnitude: float
    detail: str


@dataclass(frozen=True)
class StabilityReport:
    distance: float
    bound: float
    differing: int
    passed: bool


@dataclass(frozen=True)
class GrowthReport:
    coefficient: float
    bound: float
    removed: int
    passed: bool
    method: str


@dataclass(frozen=True)
class Quadratic1D:
    """(coef/2) (x - minimizer)^2; curvature and growth both equal coef."""

    coef: float
    minimizer: float

    def __post_init__(self):
        if not self.coef > 0:
            raise ValueError(f"coef must be positive, got {self.coef}")


@dataclass(frozen=True)
class PinchReport:
    x_star: float
    lower: float
    upper: float
    gradient_lower_ok: bool
    gradient_upper_ok: bool
    passed: bool


# -- oracle checks -----------------------------------------------------------


def _active_values_1d(inst: Instance) -> np.ndarray:
    """1-D anchor values that actually pull (all points for the plain
    quadratic, nonzero ones for the indicator family)."""
    if inst.d != 1:
        raise ValueError(f"this oracle is one-dimensional, got d = {inst.d}")
    vals = inst.dataset.points[:, 0]
    if isinstance(inst.family, IndicatorQuadratic):
        return vals[vals != 0.0]
    if isinstance(inst.family, QuadraticAnchor):
        return vals
    raise ValueError(f"this oracle needs a quadratic family, got {type(inst.family).__name__}")


def superefficiency_construct(
    base: Instance, params: SuperefficiencyParams
) -> SuperefficiencyReport:
    """Swap the last r samples for boundary anchors and measure the shift.

    Preconditions enforced, not generalized: 1-D, interpolating,
    positive declared growth, population minimizer at most 0, r < n.
    The shift of the population minimizer is then sandwiched between
    r D / n and 8 H D r / (lambda n) with D the domain radius.
    """
    lam, H = base.constants.growth, base.constants.H
    if not lam > 0:
        raise ValueError("base instance must declare positive growth")
    if not is_interpolating(base, tol=1e-10):
        raise ValueError("base instance must interpolate (zero gradients at the optimum)")
    if params.r >= base.n:
        raise ValueError(f"must keep at least one sample: r = {params.r}, n = {base.n}")
    vals = _active_values_1d(base)
    base_min = float(exact_minimizer(base)[0])
    if base_min > 0.0:
        raise ValueError(f"largest population minimizer must be <= 0, got {base_min}")
    D = base.domain.radius
    if abs(params.anchor) > D:
        raise ValueError(f"anchor {params.anchor} lies outside the domain radius {D}")

    points = base.dataset.points.copy()
    points[base.n - params.r :, 0] = params.anchor
    if isinstance(base.family, IndicatorQuadratic):
        active = points[:, 0] != 0.0
        k_new = int(active.sum())
        growth_new = k_new * H / base.n
        min_new = float(points[active, 0].mean())
    else:
        growth_new = H
        min_new = float(points[:, 0].mean())
    L_new = H * (float(np.abs(points[:, 0]).max()) + D)
    shifted = Instance(
        family=base.family,
        dataset=Dataset(points),
        domain=base.domain,
        constants=LossConstants(
            L=L_new, H=H, growth=growth_new,
            kappa=base.constants.kappa, kappa_floor=base.constants.kappa_floor,
        ),
        optimum=Optimum(np.array([min_new])),
    )
    shift = min_new - base_min
    lower = params.r * D / base.n
    upper = 8.0 * H * D * params.r / (lam * base.n)
    return SuperefficiencyReport(
        instance=shifted,
        shift=shift,
        lower_bound=lower,
        upper_bound=upper,
        passed=bool(lower - 1e-12 <= shift <= upper + 1e-12),
        base_minimizer=base_min,
        params=params,
    )


def modulus_oracle(base: Instance, k: int) -> ModulusReport:
    """Certified lower bounds on the minimizer shift after <= j swaps.

    For each j <= k, maximizes |new minimizer - old| over the family
    that replaces j samples with anchors at +/- the domain radius. With
    isotropic quadratics the extremal choice is exact: for the +D anchor
    swap out the j smallest anchors (for -D, the largest); the indicator
    family additionally enumerates how many of the swapped rows were
    previously off. Values are cumulative maxima, hence monotone in j.
    """
    if not (isinstance(k, int) and 0 <= k < base.n):
        raise ValueError(f"k must be an integer in [0, n), got {k}")
    vals = np.sort(_active_values_1d(base))
    D = base.domain.radius
    n = base.n
    k_active = vals.size
    zeros = n - k_active
    prefix = np.concatenate([[0.0], np.cumsum(vals)])  # sum of j smallest
    suffix = np.concatenate([[0.0], np.cumsum(vals[::-1])])  # sum of j largest
    total = float(prefix[-1])
    base_min = total / k_active if k_active else 0.0

    def best_shift(j: int) -> float:
        if j == 0:
            return 0.0
        best = 0.0
        for anchor in (D, -D):
            if isinstance(base.family, QuadraticAnchor):
                # replace j anchors; mean over all n samples
                drop = suffix[j] if anchor < 0 else prefix[j]
                new_min = (total - float(drop) + j * anchor) / n
                best = max(best, abs(new_min - base_min))
                continue
            # indicator family: j_on rows were active, j - j_on were off
            for j_on in range(0, min(j, k_active) + 1):
                if j - j_on > zeros:
                    continue
                drop = suffix[j_on] if anchor < 0 else prefix[j_on]
                new_actives = k_active - j_on + j  # anchors at +/-D are on
                new_min = (total - float(drop) + j * anchor) / new_actives
                best = max(best, abs(new_min - base_min))
        return best

    values = []
    running = 0.0
    for j in range(k + 1):
        running = max(running, best_shift(j))
        values.append(running)
    return ModulusReport(
        values=tuple(values),
        anchor_magnitude=D,
        detail="exact over the +/-D replacement family (isotropic quadratics)",
    )


def stability_bound_check(
    base: Instance, swapped: Instance, k: int, constants: LossConstants
) -> StabilityReport:
    """Minimizer shift of a <= k-sample swap against 4 k L / (lambda n)."""
    if not (isinstance(k, int) and k >= 0):
        raise ValueError(f"k must be a nonnegative integer, got {k}")
    if base.n != swapped.n or base.d != swapped.d:
        raise ValueError("instances must share n and d")
    if type(base.family) is not type(swapped.family):
        raise ValueError("instances must share a loss family")
    differ = (base.dataset.points != swapped.dataset.points).any(axis=1)
    if base.dataset.labels is not None:
        differ |= base.dataset.labels != swapped.dataset.labels
    differing = int(differ.sum())
    if differing > k:
        raise ValueError(f"instances differ in {differing} samples, more than k = {k}")
    if not constants.growth > 0:
        raise ValueError("stability bound needs a positive growth coefficient")
    distance = float(np.linalg.norm(exact_minimizer(base) - exact_minimizer(swapped)))
    bound = 4.0 * k * constants.L / (constants.growth * base.n)
    return StabilityReport(
        distance=distance,
        bound=bound,
        differing=differing,
        passed=bool(distance <= bound + 1e-12),
    )


def growth_closure_check(base: Instance, r: int, eps: float | None = None) -> GrowthReport:
    """Worst-case growth coefficient after dropping r samples.

    Keeps the 1/n weighting, so dropping a sample removes its curvature
    contribution from the average. Per-sample Hessians are isotropic, so
    dropping the r largest contributions is the exact adversary. The
    bound is lambda - H / (n * eps) with eps defaulting to 1/r (that is,
    lambda - H r / n); r = 0 leaves the declared coefficient untouched.
    """
    if not (isinstance(r, int) and 0 <= r < base.n):
        raise ValueError(f"r must be an integer in [0, n), got {r}")
    if eps is None:
        eps = math.inf if r == 0 else 1.0 / r
    elif not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    H = base.constants.H
    if isinstance(base.family, QuadraticAnchor):
        contributions = np.full(base.n, H)
    elif isinstance(base.family, IndicatorQuadratic):
        contributions = np.where(base.dataset.points.any(axis=1), H, 0.0)
    else:
        raise ValueError("growth closure needs a quadratic family")
    worst = float(np.sort(contributions)[::-1][:r].sum())
    coefficient = (float(contributions.sum()) - worst) / base.n
    bound = base.constants.growth - (0.0 if math.isinf(eps) else H / (base.n * eps))
    return GrowthReport(
        coefficient=coefficient,
        bound=bound,
        removed=r,
        passed=bool(coefficient >= bound - 1e-12),
        method="exact-isotropic",
    )


def pinch_check(h: Quadratic1D, g: Quadratic1D, grid: int = 41) -> PinchReport:
    """Locate the minimizer of the average of two 1-D quadratics.

    Checks the pinch inequalities

        (c_g/2) / (c_g/2 + c_h) <= t <= c_g / (c_h/2 + c_g),
        t = (x* - m_h) / (m_g - m_h),

    (trivially 0 when the minimizers coincide) and, on an evenly spaced
    grid around both minimizers, the gradient envelope
    (lambda/2) dist <= |F'| <= H dist for the averaged objective.
    """
    gap = g.minimizer - h.minimizer
    lower = (g.coef / 2.0) / (g.coef / 2.0 + h.coef)
    upper = g.coef / (h.coef / 2.0 + g.coef)
    if gap == 0.0:
        # coinciding minimizers: the average is minimized exactly there, and
        # the weighted-average formula would only add rounding drift
        x_star = h.minimizer
        pinch_ok = True
        lower_pt, upper_pt = h.minimizer, h.minimizer
    else:
        x_star = (h.coef * h.minimizer + g.coef * g.minimizer) / (h.coef + g.coef)
        t = (x_star - h.minimizer) / gap
        pinch_ok = lower - 1e-12 <= t <= upper + 1e-12
        lower_pt = h.minimizer + lower * gap
        upper_pt = h.minimizer + upper * gap
    avg_coef = (h.coef + g.coef) / 2.0  # curvature of the averaged objective
    span = max(abs(gap), 1.0)
    xs = np.linspace(
        min(h.minimizer, g.minimizer) - span, max(h.minimizer, g.minimizer) + span, grid
    )
    fprime = 0.5 * (h.coef * (xs - h.minimizer) + g.coef * (xs - g.minimizer))
    dist = np.abs(xs - x_star)
    glow = bool(np.all(np.abs(fprime) >= (avg_coef / 2.0) * dist - 1e-12))
    ghigh = bool(np.all(np.abs(fprime) <= avg_coef * dist + 1e-12))
    return PinchReport(
        x_star=x_star,
        lower=min(lower_pt, upper_pt),
        upper=max(lower_pt, upper_pt),
        gradient_lower_ok=glow,
        gradient_upper_ok=ghigh,
        passed=bool(pinch_ok and glow and ghigh),
    )
