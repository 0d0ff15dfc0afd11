"""Quadratic cone fields, domination certificates, and splitting extraction.

A dominated splitting is certified through quadratic cones: for a
threshold ``tau`` strictly between the extreme singular values of a
map, the cone of vectors expanded by at least ``tau`` has mixed
signature, and the map dominates at rate ``tau`` precisely when it
sends that cone strictly inside itself.  Strict containment of one
quadratic cone in another is decidable by the S-procedure: the cone of
``S_1`` lies in the open cone of ``S_2`` (zero excepted) iff
``S_2 - lam S_1`` is positive definite for some ``lam >= 0``, and the
best margin over ``lam`` is a concave scalar problem solved by
golden-section search.

Building on this, the module finds uniform domination exponents for
rotated one-parameter families over a grid, derives a robustness radius
from the observed margins via explicit perturbation bounds, extracts
invariant splittings along orbits by re-orthonormalized cocycle
products, and measures the contraction/expansion/center rates that
enter the bunching inequality ``max(nu, nu_hat) < gamma gamma_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import (
    containment_margin,
    grid_domination_margins,
    mat_pow_int,
    qr_product_forward,
    qr_product_pullback,
)
from .deformation import RotationPlane
from .nilmanifold import DIM, AutomorphismSpec, LatticeSpec
from .spectral_planner import AnnulusSpec

__all__ = [
    "DegenerateConeError",
    "CertificationError",
    "QuadraticCone",
    "cone_from_map",
    "image_cone",
    "ContainmentCertificate",
    "compactly_contained",
    "DominationWitness",
    "find_domination_exponent",
    "RobustnessReport",
    "robustness_radius",
    "CocycleProduct",
    "cocycle_product",
    "LinearDynamics",
    "principal_angle",
    "splitting_distance",
    "subspace_intersection",
    "SplittingEstimate",
    "extract_splitting",
    "PartiallyHyperbolicFrames",
    "extract_partially_hyperbolic_frames",
    "RateReport",
    "bunching_report",
    "SweepPoint",
    "splitting_deviation_sweep",
    "STRONG_STABLE_AXES",
    "CENTER_AXES",
    "EXPANDING_AXES",
]

# Coordinate axes of the three invariant bundles of the block-diagonal
# automorphism with per-plane multipliers (l1, l1, l1^2 | l2, l2, l2^2 |
# l3, l3, l3^2) and eigenvalue chain l2^2 < l1 < l2 < 1 < l3: the four
# most contracted directions, the two intermediate ones, and the three
# expanding ones.
STRONG_STABLE_AXES = (0, 1, 2, 5)
CENTER_AXES = (3, 4)
EXPANDING_AXES = (6, 7, 8)


class DegenerateConeError(ValueError):
    """Raised when a quadratic form does not define a genuine cone."""


class CertificationError(RuntimeError):
    """Raised when a certification search exhausts its budget."""


def _axes_frame(axes: Sequence[int], dim: int = DIM) -> np.ndarray:
    q = np.zeros((dim, len(axes)))
    for j, ax in enumerate(axes):
        q[ax, j] = 1.0
    return q


# ---------------------------------------------------------------------------
# Quadratic cones and the S-procedure
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadraticCone:
    """The set ``{v : v^T S v >= 0}`` for a symmetric mixed-signature S.

    Mixed signature (at least one positive and one negative eigenvalue)
    is what makes the set a genuine cone with nonempty interior and
    complement; definite or semidefinite forms degenerate to everything
    or almost nothing and are rejected.
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DegenerateConeError("cone matrix must be square")
        if not np.allclose(m, m.T, atol=1e-12):
            raise DegenerateConeError("cone matrix must be symmetric")
        object.__setattr__(self, "matrix", (m + m.T) / 2.0)
        evals = np.linalg.eigvalsh(self.matrix)
        if not (evals[0] < 0.0 < evals[-1]):
            raise DegenerateConeError(
                "quadratic form is not of mixed signature "
                f"(eigenvalue range [{evals[0]:.3e}, {evals[-1]:.3e}])"
            )

    @property
    def positive_index(self) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.matrix) > 0.0))

    def contains(self, v: np.ndarray, strict: bool = False) -> bool:
        q = float(v @ self.matrix @ v)
        return q > 0.0 if strict else q >= 0.0


def cone_from_map(m: np.ndarray, tau: float) -> QuadraticCone:
    """The cone of vectors expanded by at least ``tau`` under ``m``.

    ``S = (M/tau)^T (M/tau) - I`` has mixed signature exactly when
    ``tau`` lies strictly between the smallest and largest singular
    values of ``m``; outside that range the form degenerates and
    :class:`DegenerateConeError` is raised with the admissible range.
    """
    m = np.asarray(m, dtype=float)
    if tau <= 0:
        raise DegenerateConeError("threshold must be positive")
    scaled = m / tau
    s = scaled.T @ scaled - np.eye(m.shape[0])
    try:
        return QuadraticCone(matrix=s)
    except DegenerateConeError:
        sv = np.linalg.svd(m, compute_uv=False)
        raise DegenerateConeError(
            f"threshold {tau:.6g} is outside the open singular value range "
            f"({sv[-1]:.6g}, {sv[0]:.6g}) of the map"
        ) from None


def image_cone(cone: QuadraticCone, m: np.ndarray) -> QuadraticCone:
    """The image ``{M v : v in cone}``, again a quadratic cone.

    Membership of ``w = M v`` is the membership of ``v = M^-1 w``, so
    the matrix transforms by ``M^-T S M^-1``.
    """
    minv = np.linalg.inv(np.asarray(m, dtype=float))
    return QuadraticCone(matrix=minv.T @ cone.matrix @ minv)


@dataclass(frozen=True, eq=False)
class ContainmentCertificate:
    """Outcome of a compact-containment check between two cones.

    ``margin`` is the best S-procedure value: the maximum over
    ``lam >= 0`` of the smallest eigenvalue of ``outer - lam * inner``.
    Positive margin certifies that the inner cone minus the origin lies
    in the open interior of the outer cone; otherwise ``witness`` holds
    the direction realizing the violated eigenvalue.
    """

    margin: float
    multiplier: float
    witness: Optional[np.ndarray] = None

    @property
    def contained(self) -> bool:
        return self.margin > 0.0


def compactly_contained(
    inner: QuadraticCone,
    outer: QuadraticCone,
    lam_hi: float = 8.0,
    tol: float = 1e-12,
) -> ContainmentCertificate:
    """Certify that the inner cone is compactly contained in the outer one.

    The multiplier search interval ``[0, lam_hi]`` is doubled while the
    maximizer sits at its boundary, so an unfortunate initial bound
    cannot produce a false negative.
    """
    s_in = inner.matrix
    s_out = outer.matrix
    hi = float(lam_hi)
    for _ in range(24):
        margin, lam = containment_margin(s_in, s_out, hi, tol)
        if lam < 0.95 * hi:
            break
        hi *= 2.0
    witness = None
    if margin <= 0.0:
        evals, vecs = np.linalg.eigh(s_out - lam * s_in)
        witness = vecs[:, 0].copy()
    return ContainmentCertificate(
        margin=float(margin), multiplier=float(lam), witness=witness
    )


# ---------------------------------------------------------------------------
# Uniform domination exponent over a rotated family
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DominationWitness:
    """A uniform exponent certifying strict cone invariance on a grid.

    ``history`` keeps one row per attempted exponent — ``(n, margin_1,
    ..., margin_k)`` with the worst grid margin per threshold — so
    failed exponents remain inspectable and exportable.
    """

    exponent: int
    thresholds: tuple[float, ...]
    worst_margins: tuple[float, ...]
    worst_thetas: tuple[float, ...]
    multipliers: tuple[float, ...]
    grid: int
    margin_floor: float
    history: tuple[tuple[float, ...], ...]

    def describe(self) -> str:
        pieces = ", ".join(
            f"tau={t:.4g}: margin {m:.4e} at theta={th:.4f}"
            for t, m, th in zip(
                self.thresholds, self.worst_margins, self.worst_thetas
            )
        )
        return f"n = {self.exponent} ({pieces})"


def find_domination_exponent(
    diag: np.ndarray,
    plane: RotationPlane,
    a: float,
    annuli: Sequence[AnnulusSpec],
    n_max: int = 64,
    grid: int = 1024,
    margin_floor: float = 1e-6,
    lam_hi: float = 8.0,
    tol: float = 1e-12,
) -> DominationWitness:
    """Smallest n making every n-step rotated map dominate strictly.

    For each exponent ``n`` and each annulus, the expansion cone at
    threshold ``beta^n`` (the annulus's upper edge, compounded) is
    tested for strict self-containment under ``(R_theta D)^n`` at every
    grid angle ``theta`` in ``[0, a]`` — the untwisted map is the
    ``theta = 0`` grid point.  The first exponent whose worst margin
    clears ``margin_floor`` for every annulus is returned; exhausting
    ``n_max`` raises :class:`CertificationError` carrying the margin
    history on the exception.
    """
    diag = np.asarray(diag, dtype=float)
    if a < 0:
        raise ValueError("rotation range must be nonnegative")
    thetas = np.linspace(0.0, a, grid) if a > 0 else np.array([0.0])
    history: list[tuple[float, ...]] = []
    for n in range(1, n_max + 1):
        worst_margins = []
        worst_thetas = []
        multipliers = []
        for ann in annuli:
            res = grid_domination_margins(
                diag, thetas, n, ann.beta_q, plane.e1, plane.e2, lam_hi, tol
            )
            k = int(np.argmin(res[:, 0]))
            worst_margins.append(float(res[k, 0]))
            worst_thetas.append(float(thetas[k]))
            multipliers.append(float(res[k, 1]))
        history.append((float(n), *worst_margins))
        if all(m >= margin_floor for m in worst_margins):
            return DominationWitness(
                exponent=n,
                thresholds=tuple(ann.beta_q**n for ann in annuli),
                worst_margins=tuple(worst_margins),
                worst_thetas=tuple(worst_thetas),
                multipliers=tuple(multipliers),
                grid=len(thetas),
                margin_floor=margin_floor,
                history=tuple(history),
            )
    err = CertificationError(
        f"no uniform exponent up to n_max={n_max} reaches margin "
        f"{margin_floor:g}; best row {max(history, key=lambda r: min(r[1:]))}"
    )
    err.history = tuple(history)  # type: ignore[attr-defined]
    raise err


# ---------------------------------------------------------------------------
# Robustness radius
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RobustnessReport:
    """A perturbation radius under which cone containment persists.

    ``delta`` bounds the spectral norm of an absolute perturbation of
    the n-step map.  It is derived from the grid margins through the
    explicit shift bound (see :func:`robustness_radius`) and then
    stress-tested by random perturbation trials at ``safety * delta``.
    """

    delta: float
    exponent: int
    per_threshold: tuple[float, ...]
    trials: int
    failures: int
    safety: float
    seed: int


def _containment_margin_of(matrix: np.ndarray, lam_hi: float, tol: float) -> float:
    """S-procedure margin of the normalized expansion cone of ``matrix``."""
    minv = np.linalg.inv(matrix)
    s_tgt = matrix.T @ matrix - np.eye(matrix.shape[0])
    s_img = np.eye(matrix.shape[0]) - minv.T @ minv
    margin, _ = containment_margin(s_img, s_tgt, lam_hi, tol)
    return float(margin)


def robustness_radius(
    diag: np.ndarray,
    plane: RotationPlane,
    a: float,
    annuli: Sequence[AnnulusSpec],
    n: int,
    grid: int = 256,
    trials: int = 1000,
    seed: int = 0,
    safety: float = 0.99,
    lam_hi: float = 8.0,
    tol: float = 1e-12,
) -> RobustnessReport:
    """Largest certified perturbation radius for the n-step family.

    For a perturbation ``E`` of the threshold-normalized map ``M`` with
    ``d = |E|``, the cone matrices shift by at most

    ``|dS_tgt| <= 2 |M| d + d^2`` and
    ``|dS_img| <= 2 |M^-1|^2 e + (|M^-1| e)^2`` with
    ``e = |M^-1| d / (1 - |M^-1| d)``,

    so containment persists while ``shift(d) = |dS_tgt| + lam |dS_img|``
    stays below the unperturbed margin.  The radius is the infimum over
    the theta grid and the annuli of the bisected ``d``, rescaled to an
    absolute perturbation by ``tau^n``.  Monte Carlo trials then perturb
    the n-step map at ``safety * delta`` in random directions at random
    angles and re-run the full containment check; the report records the
    failure count (an acceptable certificate has zero).
    """
    diag = np.asarray(diag, dtype=float)
    thetas = np.linspace(0.0, a, grid) if a > 0 else np.array([0.0])
    dim = diag.shape[0]

    def n_step(theta: float) -> np.ndarray:
        r = plane.rotation_matrix(theta)
        return mat_pow_int(r @ np.diag(diag), n)

    per_threshold: list[float] = []
    for ann in annuli:
        tau_n = ann.beta_q**n
        best = math.inf
        for theta in thetas:
            m = n_step(float(theta)) / tau_n
            minv = np.linalg.inv(m)
            s_tgt = m.T @ m - np.eye(dim)
            s_img = np.eye(dim) - minv.T @ minv
            margin, lam = containment_margin(s_img, s_tgt, lam_hi, tol)
            if margin <= 0:
                raise CertificationError(
                    f"cannot derive robustness radius: margin {margin:.3e} "
                    f"at theta={theta:.4f}, threshold {tau_n:.4g}"
                )
            nm = float(np.linalg.norm(m, 2))
            nmi = float(np.linalg.norm(minv, 2))

            def shift(d: float) -> float:
                if nmi * d >= 1.0:
                    return math.inf
                e = nmi * d / (1.0 - nmi * d)
                return 2.0 * nm * d + d * d + lam * (
                    2.0 * nmi * nmi * e + (nmi * e) ** 2
                )

            lo, hi = 0.0, 1.0
            for _ in range(200):
                mid = (lo + hi) / 2.0
                if shift(mid) < margin:
                    lo = mid
                else:
                    hi = mid
            best = min(best, lo * tau_n)
        per_threshold.append(best)

    delta = min(per_threshold)
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(trials):
        theta = float(rng.uniform(0.0, a)) if a > 0 else 0.0
        e = rng.normal(size=(dim, dim))
        e *= safety * delta / np.linalg.norm(e, 2)
        perturbed = n_step(theta) + e
        for ann in annuli:
            tau_n = ann.beta_q**n
            if _containment_margin_of(perturbed / tau_n, lam_hi, tol) <= 0.0:
                failures += 1
                break
    return RobustnessReport(
        delta=float(delta),
        exponent=n,
        per_threshold=tuple(per_threshold),
        trials=trials,
        failures=failures,
        safety=safety,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Cocycle products along orbits
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CocycleProduct:
    """A derivative product along an orbit segment, kept in factored form.

    ``factors[i]`` is the one-step derivative at the i-th orbit point,
    so the composite map is the left-fold ``factors[-1] ... factors[0]``.
    Composition concatenates factor sequences — ``later @ earlier``
    represents "apply ``earlier``'s segment, then ``later``'s" — which
    makes the cocycle identity hold exactly: composing the products of
    two consecutive segments is, by construction, the product of the
    concatenated segment.
    """

    factors: tuple[np.ndarray, ...]
    start: np.ndarray
    end: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.factors)

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(self.start.shape[0])
        for f in self.factors:
            out = f @ out
        return out

    def __matmul__(self, earlier: "CocycleProduct") -> "CocycleProduct":
        if not np.array_equal(earlier.end, self.start):
            raise ValueError(
                "cocycle factors do not chain: left segment must start "
                "where the right segment ends"
            )
        return CocycleProduct(
            factors=earlier.factors + self.factors,
            start=earlier.start,
            end=self.end,
        )


def cocycle_product(dyn, x: np.ndarray, n: int) -> CocycleProduct:
    """Derivative product of ``n`` steps of ``dyn`` starting at ``x``.

    ``dyn`` provides ``step_with_jacobian``; the factors are collected
    in orbit order.
    """
    if n < 0:
        raise ValueError("step count must be nonnegative")
    y = np.asarray(x, dtype=float).copy()
    start = y.copy()
    factors = []
    for _ in range(n):
        y, jac = dyn.step_with_jacobian(y)
        factors.append(jac)
    return CocycleProduct(factors=tuple(factors), start=start, end=y.copy())


class LinearDynamics:
    """Orbit interface for the undeformed automorphism.

    Mirrors the deformed map's API (step, orbits, Jacobians) with the
    constant block-diagonal derivative, so rate measurements and
    splitting extraction run identically on the deformed and undeformed
    systems.
    """

    def __init__(self, auto: AutomorphismSpec, lattice: Optional[LatticeSpec] = None):
        self.auto = auto
        self.lattice = lattice
        self._matrix = auto.matrix

    def _reduce(self, x: np.ndarray) -> np.ndarray:
        if self.lattice is None:
            return x
        return self.lattice.reduce(x)

    def step(self, x: np.ndarray) -> np.ndarray:
        return self._reduce(self.auto.apply(np.asarray(x, dtype=float)))

    def step_with_jacobian(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.step(x), self._matrix.copy()

    def step_inverse(self, x: np.ndarray) -> np.ndarray:
        return self._reduce(self.auto.apply_inverse(np.asarray(x, dtype=float)))

    def jacobian_at(self, x: np.ndarray) -> np.ndarray:
        return self._matrix.copy()

    def orbit(self, x: np.ndarray, n: int) -> np.ndarray:
        out = np.empty((n + 1, x.shape[0]))
        out[0] = np.asarray(x, dtype=float)
        for k in range(n):
            out[k + 1] = self.step(out[k])
        return out

    def orbit_inverse(self, x: np.ndarray, n: int) -> np.ndarray:
        out = np.empty((n + 1, x.shape[0]))
        out[0] = np.asarray(x, dtype=float)
        for k in range(n):
            out[k + 1] = self.step_inverse(out[k])
        return out


# ---------------------------------------------------------------------------
# Principal angles and subspace arithmetic
# ---------------------------------------------------------------------------


def principal_angle(q1: np.ndarray, q2: np.ndarray) -> float:
    """Largest principal angle between equal-dimension orthonormal frames.

    Computed from the sine ``|(I - Q1 Q1^T) Q2|_2``, which resolves
    angles near zero far better than the cosine route through
    ``svd(Q1^T Q2)``; the two directions are averaged into a max for
    exact symmetry in floating point.
    """
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    if q1.shape != q2.shape:
        raise ValueError("frames must have identical shapes")
    s12 = min(1.0, float(np.linalg.norm(q2 - q1 @ (q1.T @ q2), 2)))
    s21 = min(1.0, float(np.linalg.norm(q1 - q2 @ (q2.T @ q1), 2)))
    return float(np.arcsin(max(s12, s21)))


def splitting_distance(
    a: Sequence[np.ndarray], b: Sequence[np.ndarray]
) -> float:
    """Distance between two splittings: worst principal angle per bundle."""
    if len(a) != len(b):
        raise ValueError("splittings must have the same number of bundles")
    return max(principal_angle(qa, qb) for qa, qb in zip(a, b))


def subspace_intersection(q1: np.ndarray, q2: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal frame of the intersection of two column spans.

    The intersection is the common nullspace of the two projector
    complements; the ``dim`` smallest right singular directions of the
    stacked complements realize it.  Column signs are normalized (the
    entry of largest magnitude is made positive) for determinism.
    """
    n = q1.shape[0]
    stacked = np.vstack([q1 @ q1.T - np.eye(n), q2 @ q2.T - np.eye(n)])
    _, sv, vt = np.linalg.svd(stacked)
    frame = vt[-dim:, :].T.copy()
    for j in range(frame.shape[1]):
        k = int(np.argmax(np.abs(frame[:, j])))
        if frame[k, j] < 0:
            frame[:, j] = -frame[:, j]
    return frame


# ---------------------------------------------------------------------------
# Splitting extraction along orbits
# ---------------------------------------------------------------------------


def _jacobians_backward(dyn, x: np.ndarray, steps: int) -> np.ndarray:
    """Jacobians ordered to push a frame from g^-steps(x) up to x."""
    ys = dyn.orbit_inverse(x, steps)
    return np.stack([dyn.jacobian_at(ys[j]) for j in range(steps, 0, -1)])


def _jacobians_forward(dyn, x: np.ndarray, steps: int) -> np.ndarray:
    """Jacobians along the forward orbit from x, for pullback."""
    ys = dyn.orbit(x, steps)
    return np.stack([dyn.jacobian_at(ys[j]) for j in range(steps)])


@dataclass(frozen=True, eq=False)
class SplittingEstimate:
    """An extracted dominated splitting at a point.

    ``fast_frame`` spans the estimated more-expanded bundle (the
    forward-pushed limit), ``slow_frame`` the complementary bundle (the
    pulled-back limit).  ``gap`` is the last Cauchy increment between
    successive extraction depths; ``converged`` records whether it fell
    below the requested tolerance within the step budget.
    """

    point: np.ndarray
    fast_frame: np.ndarray
    slow_frame: np.ndarray
    steps_used: int
    gap: float
    converged: bool

    @property
    def dims(self) -> tuple[int, int]:
        return (self.slow_frame.shape[1], self.fast_frame.shape[1])


def extract_splitting(
    dyn,
    x: np.ndarray,
    slow_axes: Sequence[int],
    fast_axes: Sequence[int],
    k_start: int = 40,
    k_step: int = 20,
    k_max: int = 200,
    tol: float = 1e-10,
) -> SplittingEstimate:
    """Extract a dominated splitting at ``x`` by cocycle power iteration.

    The fast bundle is the limit of pushing a seed frame forward along
    the backward orbit (the dominant subspace of long products); the
    slow bundle is the limit of pulling a complementary seed back along
    the forward orbit.  Extraction depth increases by ``k_step`` until
    the principal-angle increment between successive depths drops below
    ``tol`` or the budget ``k_max`` is reached.
    """
    x = np.asarray(x, dtype=float)
    fast_seed = _axes_frame(fast_axes, x.shape[0])
    slow_seed = _axes_frame(slow_axes, x.shape[0])
    prev_fast = prev_slow = None
    fast = slow = None
    gap = math.inf
    steps = k_start
    while steps <= k_max:
        fast = qr_product_forward(_jacobians_backward(dyn, x, steps), fast_seed)
        slow = qr_product_pullback(_jacobians_forward(dyn, x, steps), slow_seed)
        if prev_fast is not None:
            gap = max(
                principal_angle(fast, prev_fast),
                principal_angle(slow, prev_slow),
            )
            if gap < tol:
                return SplittingEstimate(
                    point=x,
                    fast_frame=fast,
                    slow_frame=slow,
                    steps_used=steps,
                    gap=float(gap),
                    converged=True,
                )
        prev_fast, prev_slow = fast, slow
        steps += k_step
    return SplittingEstimate(
        point=x,
        fast_frame=fast,
        slow_frame=slow,
        steps_used=steps - k_step,
        gap=float(gap),
        converged=False,
    )


@dataclass(frozen=True, eq=False)
class PartiallyHyperbolicFrames:
    """Stable/center/unstable frames extracted at a point.

    The center is the intersection of the fast bundle of the lower
    splitting (center + unstable) with the slow bundle of the upper
    splitting (stable + center).
    """

    point: np.ndarray
    stable: np.ndarray
    center: np.ndarray
    unstable: np.ndarray
    lower: SplittingEstimate
    upper: SplittingEstimate

    @property
    def converged(self) -> bool:
        return self.lower.converged and self.upper.converged


def extract_partially_hyperbolic_frames(
    dyn,
    x: np.ndarray,
    k_start: int = 40,
    k_step: int = 20,
    k_max: int = 200,
    tol: float = 1e-10,
) -> PartiallyHyperbolicFrames:
    """Extract the three-bundle splitting via two dominated splittings."""
    center_and_up = tuple(CENTER_AXES) + tuple(EXPANDING_AXES)
    stable_and_center = tuple(STRONG_STABLE_AXES) + tuple(CENTER_AXES)
    lower = extract_splitting(
        dyn, x, STRONG_STABLE_AXES, center_and_up, k_start, k_step, k_max, tol
    )
    upper = extract_splitting(
        dyn, x, stable_and_center, EXPANDING_AXES, k_start, k_step, k_max, tol
    )
    center = subspace_intersection(
        lower.fast_frame, upper.slow_frame, len(CENTER_AXES)
    )
    return PartiallyHyperbolicFrames(
        point=np.asarray(x, dtype=float),
        stable=lower.slow_frame,
        center=center,
        unstable=upper.fast_frame,
        lower=lower,
        upper=upper,
    )


# ---------------------------------------------------------------------------
# Rate measurement and the bunching inequality
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RateReport:
    """Measured n-step rates on the extracted bundles, with bounds.

    The four bullet checks compare the worst measured singular values
    against the stated bounds: stable growth below ``(l1 + eps)^n``,
    center growth inside ``((l2 - eps)^n, (1 + eps)^n)``, unstable
    growth above ``(l3 - eps)^n``.  The per-step rates ``nu = s_max^(1/n)``
    etc. feed the bunching margin ``gamma * gamma_hat - max(nu, nu_hat)``.
    """

    exponent: int
    sample_count: int
    s_max: float
    c_lo: float
    c_hi: float
    u_min: float
    s_bound: float
    c_lo_bound: float
    c_hi_bound: float
    u_bound: float
    nu: float
    nu_hat: float
    gamma: float
    gamma_hat: float

    @property
    def bullets(self) -> tuple[bool, bool, bool, bool]:
        return (
            self.s_max < self.s_bound,
            self.c_lo > self.c_lo_bound,
            self.c_hi < self.c_hi_bound,
            self.u_min > self.u_bound,
        )

    @property
    def all_bullets_hold(self) -> bool:
        return all(self.bullets)

    @property
    def bunching_margin(self) -> float:
        return self.gamma * self.gamma_hat - max(self.nu, self.nu_hat)

    @property
    def center_bunched(self) -> bool:
        return self.bunching_margin > 0.0


def _rate_sample_points(
    rng: np.random.Generator,
    dyn,
    count: int,
    inner_scale: float,
    outer_radius: float,
    plane_axes: tuple[int, int],
    dim: int = DIM,
) -> list[np.ndarray]:
    """Deterministic probe set mixing bulk, funnel, and in-plane points.

    Points are drawn on the outer sphere, on a geometric ladder of
    depths down to the deformation core (with short forward orbits so
    transit points through the support appear), and on adversarial rays
    inside the rotation plane where the profile's log branch is active.
    """
    points: list[np.ndarray] = []
    # Outer probes.
    n_outer = max(4, count // 4)
    for _ in range(n_outer):
        d = rng.normal(size=dim)
        points.append(outer_radius * d / np.linalg.norm(d))
    # Funnel ladder with forward transit orbits.
    depths = [1.0, 0.3, 1e-2, 1e-5, 1e-8, 1e-12, 1e-18]
    while len(points) < count:
        for dep in depths:
            d = rng.normal(size=dim)
            x = inner_scale * dep * d / np.linalg.norm(d)
            points.append(x.copy())
            for _ in range(12):
                x = dyn.step(x)
                points.append(x.copy())
                if np.linalg.norm(x) > 3 * outer_radius:
                    break
            if len(points) >= count:
                break
        # Adversarial in-plane rays.
        for dep in (0.9, 0.5, 0.1, 1e-3, 1e-8, 1e-15):
            x = np.zeros(dim)
            x[plane_axes[0]] = inner_scale * dep / math.sqrt(2.0)
            x[plane_axes[1]] = inner_scale * dep / math.sqrt(2.0)
            points.append(x)
            if len(points) >= count:
                break
    return points[:count]


def bunching_report(
    dyn,
    rates: tuple[float, float, float],
    n: int = 2,
    eps_rate: float = 0.05,
    sample_count: int = 512,
    inner_scale: float = 0.02,
    outer_radius: float = 0.1,
    plane_axes: tuple[int, int] = (3, 8),
    seed: int = 0,
    extraction_steps: int = 80,
) -> RateReport:
    """Measure the four rate bullets and the bunching margin.

    At every sample point the three bundles are extracted by cocycle
    power iteration at fixed depth, the n-step derivative product is
    formed, and its singular values restricted to each bundle are
    aggregated into the worst observed stable/center/unstable growth.
    ``rates`` supplies the eigenvalue triple entering the bounds.
    """
    l1, l2, l3 = rates
    rng = np.random.default_rng(seed)
    points = _rate_sample_points(
        rng, dyn, sample_count, inner_scale, outer_radius, plane_axes
    )

    s_max = -math.inf
    c_lo = math.inf
    c_hi = -math.inf
    u_min = math.inf
    center_and_up = tuple(CENTER_AXES) + tuple(EXPANDING_AXES)
    stable_and_center = tuple(STRONG_STABLE_AXES) + tuple(CENTER_AXES)
    stable_seed = _axes_frame(STRONG_STABLE_AXES)
    upper_seed = _axes_frame(center_and_up)
    lower_seed = _axes_frame(stable_and_center)
    unstable_seed = _axes_frame(EXPANDING_AXES)

    for x in points:
        jb = _jacobians_backward(dyn, x, extraction_steps)
        jf = _jacobians_forward(dyn, x, extraction_steps)
        q_upper = qr_product_forward(jb, upper_seed)
        q_unstable = qr_product_forward(jb, unstable_seed)
        q_stable = qr_product_pullback(jf, stable_seed)
        q_lower = qr_product_pullback(jf, lower_seed)
        q_center = subspace_intersection(q_upper, q_lower, len(CENTER_AXES))

        t = cocycle_product(dyn, x, n).matrix
        sv_s = np.linalg.svd(t @ q_stable, compute_uv=False)
        sv_c = np.linalg.svd(t @ q_center, compute_uv=False)
        sv_u = np.linalg.svd(t @ q_unstable, compute_uv=False)
        s_max = max(s_max, float(sv_s[0]))
        c_lo = min(c_lo, float(sv_c[-1]))
        c_hi = max(c_hi, float(sv_c[0]))
        u_min = min(u_min, float(sv_u[-1]))

    return RateReport(
        exponent=n,
        sample_count=len(points),
        s_max=s_max,
        c_lo=c_lo,
        c_hi=c_hi,
        u_min=u_min,
        s_bound=(l1 + eps_rate) ** n,
        c_lo_bound=(l2 - eps_rate) ** n,
        c_hi_bound=(1.0 + eps_rate) ** n,
        u_bound=(l3 - eps_rate) ** n,
        nu=s_max ** (1.0 / n),
        nu_hat=u_min ** (-1.0 / n),
        gamma=c_lo ** (1.0 / n),
        gamma_hat=c_hi ** (-1.0 / n),
    )


# ---------------------------------------------------------------------------
# Splitting deviation sweep over support radii
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepPoint:
    """Worst splitting deviation on the probe set for one support radius."""

    radius: float
    deviation: float
    probes: int


def _probe_directions(
    rng: np.random.Generator, count: int, dim: int = DIM
) -> list[np.ndarray]:
    """Probe directions biased toward the expanding block.

    Two thirds live entirely in the expanding coordinates (where the
    deformed splitting deviates most), the rest are mixed with the
    expanding block up-weighted.
    """
    dirs = []
    n_pure = (2 * count) // 3
    for _ in range(n_pure):
        w = rng.normal(size=len(EXPANDING_AXES))
        w /= np.linalg.norm(w)
        v = np.zeros(dim)
        v[list(EXPANDING_AXES)] = w
        dirs.append(v)
    while len(dirs) < count:
        w = rng.normal(size=dim)
        w[list(EXPANDING_AXES)] *= 10.0
        dirs.append(w / np.linalg.norm(w))
    return dirs


def splitting_deviation_sweep(
    dynamics_for_radius,
    radii: Sequence[float],
    probe_radius: float = 0.1,
    probe_count: int = 24,
    seed: int = 1,
    extraction_steps: int = 90,
) -> tuple[SweepPoint, ...]:
    """Worst probe-set deviation of the extracted splitting per radius.

    ``dynamics_for_radius`` maps a support radius to an orbit-capable
    system (radius 0 meaning the undeformed map).  For each radius the
    unstable and stable bundles are extracted at every probe point (all
    at distance ``probe_radius`` from the fixed point, outside every
    support ball in the sweep) and compared against the undeformed
    coordinate bundles; the sweep records the worst principal angle.

    The same seeded probe directions are used for every radius, so the
    sweep isolates the effect of the support radius alone.
    """
    rng = np.random.default_rng(seed)
    dirs = _probe_directions(rng, probe_count)
    unstable_ref = _axes_frame(EXPANDING_AXES)
    stable_ref = _axes_frame(STRONG_STABLE_AXES)
    unstable_seed = unstable_ref.copy()
    stable_seed = stable_ref.copy()

    out = []
    for radius in radii:
        dyn = dynamics_for_radius(radius)
        worst = 0.0
        for v in dirs:
            x = probe_radius * v
            q_u = qr_product_forward(
                _jacobians_backward(dyn, x, extraction_steps), unstable_seed
            )
            q_s = qr_product_pullback(
                _jacobians_forward(dyn, x, extraction_steps), stable_seed
            )
            worst = max(
                worst,
                principal_angle(q_u, unstable_ref),
                principal_angle(q_s, stable_ref),
            )
        out.append(SweepPoint(radius=float(radius), deviation=float(worst), probes=len(dirs)))
    return tuple(out)
