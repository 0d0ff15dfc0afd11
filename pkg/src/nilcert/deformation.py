"""Compactly supported local rotations and the deformed dynamics.

The deformation is a radial rotation in a fixed 2-plane: a point at
distance ``r`` from the chart origin is rotated by the angle ``psi(r)``,
where ``psi`` is a plateau-log-cutoff profile.  Composing this local
rotation with a hyperbolic automorphism produces the deformed map whose
partial hyperbolicity the rest of the package certifies.

The profile ``psi`` has three analytic pieces:

* a plateau at height ``a`` on ``[0, b]``,
* a logarithmic ramp ``-(eps/2) log t + c`` that descends from ``a`` at
  ``t = b`` to ``0`` at ``t = eps/2``, and
* zero beyond ``eps/2``,

with the two seams smoothed by C^2 quintic blends of half-width
``w = b/4``.  The ramp is the extremal profile for the constraint
``|t psi'(t)| <= eps/2``: it realizes the bound with equality, which is
what lets a rotation by a macroscopic angle ``a`` fit inside an
arbitrarily small ball at bounded Jacobian distortion.  Construction
fails loudly if the smoothed profile violates ``sup |t psi'| < eps`` on
a dense verification grid.

Numerical care: ``b = (eps/2) exp(-2a/eps)`` collapses towards (and
below) the smallest positive float already for moderate plateau
heights.  All blend endpoint data is therefore computed from the scale
ratio ``2w/(b + w) = 2/5``, which is exact by construction, rather than
from ``1/b`` style quantities that overflow; windows too narrow to
represent in floating point are dropped entirely (the seam degenerates
to a kink that still satisfies the slope bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .nilmanifold import DIM, AutomorphismSpec, LatticeSpec

__all__ = [
    "ProfileError",
    "DeformationError",
    "BumpProfile",
    "RotationPlane",
    "LocalRotationMap",
    "DeformedMap",
    "make_profile",
    "psi_eval",
    "psi_slope",
    "h_eval",
    "h_jacobian",
    "deformed_map",
]

# Narrower blend windows than this cannot be trusted in float64: the
# quintic endpoint data stays finite, but there may be no representable
# points strictly inside the window.  Such windows are dropped.
_MIN_BLEND_HALF_WIDTH = 1e-300


class ProfileError(ValueError):
    """Raised when a bump profile cannot be built to specification."""


class DeformationError(ValueError):
    """Raised when a deformation does not fit its chart."""


# ---------------------------------------------------------------------------
# Bump profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpProfile:
    """A plateau-log-cutoff rotation-angle profile.

    Attributes
    ----------
    a:
        Plateau height: the rotation angle applied on a neighbourhood of
        the origin.
    eps:
        Support scale.  The profile vanishes for ``t >= eps/2 + w``, and
        the radial slope obeys ``sup |t psi'(t)| < eps``.
    b:
        End of the plateau, ``(eps/2) exp(-2a/eps)``.  May be ``0.0``
        when the exact value underflows; the plateau then survives only
        at ``t = 0``.
    c:
        Offset of the logarithmic ramp ``-(eps/2) log t + c``.
    w:
        Half-width of the C^2 blend windows, ``b/4``.
    lo_blend, hi_blend:
        Whether the inner/outer blend windows are active.  A window is
        dropped when it is too narrow to contain floating point numbers;
        the seam is then a kink, continuous with one-sided slopes that
        still satisfy the slope bound.
    sup_t_slope:
        Measured supremum of ``|t psi'(t)|`` on the verification grid.
    """

    a: float
    eps: float
    b: float
    c: float
    w: float
    lo_blend: bool
    hi_blend: bool
    sup_t_slope: float

    @property
    def support_radius(self) -> float:
        """Radius beyond which the profile is identically zero."""
        return self.eps / 2 + (self.w if self.hi_blend else 0.0)

    @property
    def params(self) -> np.ndarray:
        """Flat parameter vector consumed by the numerical kernels."""
        return np.array(
            [
                self.a,
                self.eps,
                self.b,
                self.c,
                self.w,
                1.0 if self.lo_blend else 0.0,
                1.0 if self.hi_blend else 0.0,
            ]
        )


def make_profile(a: float, eps: float, verify_points: int = 2001) -> BumpProfile:
    """Construct and verify a bump profile.

    Parameters
    ----------
    a:
        Plateau height (rotation angle at the origin); must be positive.
    eps:
        Support scale; must be positive.  No upper bound is enforced
        here; whether the support fits a chart is the deformed map's
        concern.
    verify_points:
        Number of logarithmically spaced radii in the slope
        verification scan (blend windows are additionally scanned
        linearly).

    Raises
    ------
    ProfileError
        If the inputs are not positive, or if the smoothed profile
        violates the strict slope bound ``sup |t psi'(t)| < eps`` on the
        verification grid.  The latter is a loud failure by design:
        every downstream distortion estimate leans on this bound.
    """
    if not (a > 0) or not math.isfinite(a):
        raise ProfileError(f"plateau height must be positive and finite, got {a}")
    if not (eps > 0) or not math.isfinite(eps):
        raise ProfileError(f"support scale must be positive and finite, got {eps}")

    half = 0.5 * eps
    # exp(-2a/eps) underflows to 0.0 gracefully; b == 0.0 simply means the
    # plateau is unrepresentably thin.
    b = half * math.exp(-2.0 * a / eps) if (2.0 * a / eps) < 1400.0 else 0.0
    c = half * math.log(half)
    w = 0.25 * b

    lo_blend = (
        w >= _MIN_BLEND_HALF_WIDTH
        and b - w < b < b + w
        and b + w < half - w
    )
    hi_blend = (
        w >= _MIN_BLEND_HALF_WIDTH
        and half - w < half < half + w
        and b + w < half - w
    )
    profile = BumpProfile(
        a=float(a),
        eps=float(eps),
        b=float(b),
        c=float(c),
        w=float(w),
        lo_blend=lo_blend,
        hi_blend=hi_blend,
        sup_t_slope=math.nan,
    )
    sup = _measure_sup_t_slope(profile, verify_points)
    if not (sup < eps):
        raise ProfileError(
            f"slope bound violated after smoothing: sup |t psi'| = {sup:.6e} "
            f">= eps = {eps:.6e}"
        )
    return BumpProfile(
        a=profile.a,
        eps=profile.eps,
        b=profile.b,
        c=profile.c,
        w=profile.w,
        lo_blend=profile.lo_blend,
        hi_blend=profile.hi_blend,
        sup_t_slope=sup,
    )


def _measure_sup_t_slope(p: BumpProfile, n: int) -> float:
    """Supremum of |t psi'(t)| over a dense verification grid."""
    params = p.params
    half = 0.5 * p.eps
    hi_end = p.support_radius
    lo = p.b / 8 if p.b > 0 else half * 1e-12
    lo = max(lo, 5e-324 * 1e10)
    ts = list(np.geomspace(lo, hi_end, n))
    if p.lo_blend:
        ts += list(np.linspace(p.b - p.w, p.b + p.w, 501))
    if p.hi_blend:
        ts += list(np.linspace(half - p.w, half + p.w, 501))
    sup = 0.0
    for t in ts:
        if t <= 0:
            continue
        v = abs(t * _kernels.psi_slope_params(float(t), params))
        if v > sup:
            sup = v
    return sup


def psi_eval(profile: BumpProfile, t):
    """Profile value at radius ``t`` (scalar or array)."""
    params = profile.params
    if np.isscalar(t):
        return float(_kernels.psi_eval_params(float(t), params))
    tt = np.asarray(t, dtype=float)
    out = np.empty_like(tt)
    flat_in = tt.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = _kernels.psi_eval_params(float(flat_in[i]), params)
    return out


def psi_slope(profile: BumpProfile, t):
    """Profile radial derivative at ``t`` (scalar or array)."""
    params = profile.params
    if np.isscalar(t):
        return float(_kernels.psi_slope_params(float(t), params))
    tt = np.asarray(t, dtype=float)
    out = np.empty_like(tt)
    flat_in = tt.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = _kernels.psi_slope_params(float(flat_in[i]), params)
    return out


# ---------------------------------------------------------------------------
# Rotation plane and local rotation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RotationPlane:
    """An oriented 2-plane given by an orthonormal basis pair."""

    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self) -> None:
        e1 = np.asarray(self.e1, dtype=float)
        e2 = np.asarray(self.e2, dtype=float)
        if e1.ndim != 1 or e1.shape != e2.shape or e1.shape[0] < 2:
            raise ValueError(
                "plane basis vectors must share a 1-D shape of length >= 2"
            )
        if (
            abs(np.dot(e1, e1) - 1.0) > 1e-12
            or abs(np.dot(e2, e2) - 1.0) > 1e-12
            or abs(np.dot(e1, e2)) > 1e-12
        ):
            raise ValueError("plane basis must be orthonormal")
        object.__setattr__(self, "e1", e1)
        object.__setattr__(self, "e2", e2)

    @classmethod
    def from_basis_indices(cls, i: int, j: int, dim: int = DIM) -> "RotationPlane":
        """Coordinate plane spanned by basis vectors ``i`` and ``j``."""
        if not (0 <= i < dim and 0 <= j < dim) or i == j:
            raise ValueError("need two distinct basis indices in range")
        e1 = np.zeros(dim)
        e2 = np.zeros(dim)
        e1[i] = 1.0
        e2[j] = 1.0
        return cls(e1=e1, e2=e2)

    def rotation_matrix(self, theta: float) -> np.ndarray:
        """Rotation by ``theta`` in the plane, identity on its complement."""
        e1, e2 = self.e1, self.e2
        ct, st = math.cos(theta), math.sin(theta)
        out = np.eye(e1.shape[0])
        out += (ct - 1.0) * (np.outer(e1, e1) + np.outer(e2, e2))
        out += st * (np.outer(e2, e1) - np.outer(e1, e2))
        return out

    @property
    def generator(self) -> np.ndarray:
        """Angular generator ``d/d theta`` of the rotation family at 0."""
        return np.outer(self.e2, self.e1) - np.outer(self.e1, self.e2)


@dataclass(frozen=True)
class LocalRotationMap:
    """Rotation by the profile angle about a centre: x -> R_{psi(|x - q|)}(x - q) + q."""

    profile: BumpProfile
    plane: RotationPlane
    center: np.ndarray = field(default_factory=lambda: np.zeros(DIM))

    def __post_init__(self) -> None:
        ctr = np.asarray(self.center, dtype=float)
        if ctr.shape != (DIM,):
            raise ValueError("center must be a 9-vector")
        if self.plane.e1.shape != (DIM,):
            raise ValueError(f"rotation plane must live in dimension {DIM}")
        object.__setattr__(self, "center", ctr)

    @property
    def support_radius(self) -> float:
        return self.profile.support_radius

    def in_support(self, x) -> bool:
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - self.center))
        return r < self.support_radius

    def apply(self, x) -> np.ndarray:
        v = np.asarray(x, dtype=float) - self.center
        out = _kernels.h_apply(v, self.profile.params, self.plane.e1, self.plane.e2)
        return out + self.center

    def apply_inverse(self, y) -> np.ndarray:
        """Exact inverse: rotate back by the angle at the (preserved) radius."""
        v = np.asarray(y, dtype=float) - self.center
        r = float(np.linalg.norm(v))
        theta = float(_kernels.psi_eval_params(r, self.profile.params))
        if theta == 0.0:
            return np.array(y, dtype=float)
        out = _kernels.rotate_in_plane(v, self.plane.e1, self.plane.e2, -theta)
        return out + self.center

    def jacobian(self, x) -> np.ndarray:
        """Derivative at ``x``: the in-place rotation plus a rank-one radial term.

        The radial term carries the factor ``r psi'(r)``, bounded by the
        profile's slope bound, so the Jacobian never blows up even where
        ``psi'`` itself is enormous (tiny radii on the logarithmic ramp).
        At the centre the derivative is exactly the rotation by the
        plateau angle.
        """
        v = np.asarray(x, dtype=float) - self.center
        return _kernels.h_jacobian(v, self.profile.params, self.plane.e1, self.plane.e2)


def h_eval(rotation: LocalRotationMap, x) -> np.ndarray:
    """Value of the local rotation at ``x``."""
    return rotation.apply(x)


def h_jacobian(rotation: LocalRotationMap, x) -> np.ndarray:
    """Jacobian of the local rotation at ``x``."""
    return rotation.jacobian(x)


# ---------------------------------------------------------------------------
# The deformed map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeformedMap:
    """Composition of a hyperbolic automorphism with a local rotation.

    In the exponential chart at the fixed point the map is
    ``g(x) = h(B x)`` where ``B`` is the automorphism and ``h`` the
    local rotation.  Its derivative in the left-invariant frame is
    ``Dh(B x) . B``, which equals ``B`` outside the rotation support and
    the rotation by the plateau angle times ``B`` at the fixed point.

    When a lattice is attached, :meth:`step` keeps orbit representatives
    reduced.  Chart formulas expect reduced representatives: the
    rotation support ball embeds in the quotient (its diameter is well
    below the shortest lattice displacement), so the reduced
    representative is the meaningful one.
    """

    auto: AutomorphismSpec
    rotation: LocalRotationMap
    lattice: Optional[LatticeSpec] = None
    chart_radius: float = 0.3

    def __post_init__(self) -> None:
        if not (self.chart_radius > 0):
            raise DeformationError("chart radius must be positive")
        if self.rotation.support_radius >= self.chart_radius:
            raise DeformationError(
                "support radius too large for chart: "
                f"{self.rotation.support_radius:.6g} >= {self.chart_radius:.6g}"
            )

    # -- geometric constants --------------------------------------------------

    @property
    def expansion_constant(self) -> float:
        """Worst one-step metric distortion ``K`` of the rotated dynamics.

        Rotations are isometries, so the singular values of the rotated
        map equal those of the automorphism and ``K`` is the larger of
        the top singular value and the reciprocal of the bottom one.
        """
        lo, hi = self.auto.expansion_bounds()
        return max(hi, 1.0 / lo)

    def lemma_ball_radius(self, n: int) -> float:
        """Radius ``eps * K^(2n)`` of the worst-case n-step excursion ball.

        This is the crude a priori bound on how far 2n steps can carry
        the support ball; it is reported (not enforced) because it is
        astronomically conservative for the parameters of interest,
        while orbit-level reduction keeps actual excursions inside the
        chart.
        """
        return self.rotation.profile.eps * self.expansion_constant ** (2 * n)

    # -- chart dynamics ---------------------------------------------------------

    def apply(self, x) -> np.ndarray:
        """One step of the deformed map in chart coordinates."""
        y = self.auto.apply(x)
        return self.rotation.apply(y)

    def apply_inverse(self, y) -> np.ndarray:
        """Inverse step: undo the rotation, then the automorphism."""
        return self.auto.apply_inverse(self.rotation.apply_inverse(y))

    def jacobian_at(self, x) -> np.ndarray:
        """Frame derivative ``Dh(B x) . B`` at ``x``."""
        y = self.auto.apply(x)
        jh = self.rotation.jacobian(y)
        # Right-multiplying by the diagonal automorphism scales columns.
        return jh * self.auto.diag[np.newaxis, :]

    # -- quotient dynamics --------------------------------------------------------

    def step(self, x) -> np.ndarray:
        """One step of the quotient dynamics on reduced representatives.

        The automorphism image is reduced *before* the rotation is
        applied: support membership is a property of the manifold point,
        so it must be decided on the small representative.  (The
        rotation is centred at the origin and preserves the norm, so no
        second reduction is needed.)
        """
        y = self.auto.apply(x)
        if self.lattice is not None:
            y = self.lattice.reduce(y)
        return self.rotation.apply(y)

    def step_with_jacobian(self, x) -> tuple[np.ndarray, np.ndarray]:
        """One reduced step together with the frame derivative along it.

        The derivative is evaluated at the reduced automorphism image,
        matching :meth:`step`; left translations act trivially on the
        left-invariant frame, so reduction does not otherwise enter.
        """
        y = self.auto.apply(x)
        if self.lattice is not None:
            y = self.lattice.reduce(y)
        jac = self.rotation.jacobian(y) * self.auto.diag[np.newaxis, :]
        return self.rotation.apply(y), jac

    def step_inverse(self, y) -> np.ndarray:
        """Inverse quotient step: undo the rotation, the automorphism, reduce."""
        x = self.auto.apply_inverse(self.rotation.apply_inverse(y))
        if self.lattice is not None:
            x = self.lattice.reduce(x)
        return x

    def orbit(self, x, n: int) -> np.ndarray:
        """Reduced orbit ``x, g(x), ..., g^n(x)`` as an ``(n+1, 9)`` array."""
        out = np.empty((n + 1, DIM))
        cur = np.asarray(x, dtype=float)
        out[0] = cur
        for k in range(n):
            cur = self.step(cur)
            out[k + 1] = cur
        return out

    def orbit_inverse(self, x, n: int) -> np.ndarray:
        """Reduced backward orbit ``x, g^-1(x), ..., g^-n(x)``."""
        out = np.empty((n + 1, DIM))
        cur = np.asarray(x, dtype=float)
        out[0] = cur
        for k in range(n):
            cur = self.step_inverse(cur)
            out[k + 1] = cur
        return out


def deformed_map(
    auto: AutomorphismSpec,
    rotation: LocalRotationMap,
    lattice: Optional[LatticeSpec] = None,
    chart_radius: float = 0.3,
) -> DeformedMap:
    """Build the deformed map ``h o B``, validating chart fit.

    Raises :class:`DeformationError` when the rotation support does not
    fit strictly inside the chart.
    """
    return DeformedMap(
        auto=auto, rotation=rotation, lattice=lattice, chart_radius=chart_radius
    )
