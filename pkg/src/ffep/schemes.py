"""Factor-approximation back-ends: four ways to fit a Gaussian to one factor.

Each scheme answers the same question: given a proper diagonal-Gaussian
cavity c and a black-box factor f (exposing log-values, and for the
Laplace-style schemes also gradient/Hessian-diagonal), produce a
DiagGaussian message g standing in for f.

* ``la``  - Laplace: maximize c*f with damped diagonal Newton, then fit the
            second-order Taylor expansion of log f at the maximizer.
* ``qla`` - quick Laplace: the same Taylor fit taken at the cavity mean,
            skipping the inner optimization entirely (and therefore
            independent of the cavity variance).
* ``gq``  - Gaussian quadrature: estimate the order-0/1/2 moments of c*f
            with the deterministic precision-3 sigma-point rule, match a
            Gaussian to them, and divide the cavity back out.
* ``vq``  - variational quadrature: minimize a quadrature discretization of
            the generalized KL divergence D(c*f || c*g) over the natural
            parameters of g, by Newton with Cholesky solves.  Exact whenever
            f itself is a factorized Gaussian, using the same 2d+1 factor
            evaluations as ``gq``, and it outputs the message directly with
            no cavity division.

Messages may legitimately come out improper (nonnegative theta^2
coefficient); admissibility is the EP engine's call, not ours.  Failures to
produce any message at all raise SchemeFailure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .gaussian import (
    DiagGaussian,
    ImproperGaussianError,
    MomentMatchError,
    MomentVector,
    divide,
    eval_log,
    moments_to_natural,
)

__all__ = [
    "QuadratureRule",
    "SchemeKind",
    "SchemeFailure",
    "scheme_from_name",
    "build_rule",
    "default_gamma",
    "quadrature_moments",
    "approx_laplace",
    "approx_quick_laplace",
    "approx_gauss_quadrature",
    "approx_variational_quadrature",
    "surrogate_value_grad_hess",
    "generalized_kl_diagnostic",
    "approximate",
]

# exponents above this are treated as overflow-bound and force step damping
_EXP_GUARD = 500.0
_MAX_HALVINGS = 30


class SchemeFailure(RuntimeError):
    """A scheme could not produce a candidate message; the engine decides."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details


@dataclass(frozen=True)
class SchemeKind:
    """Scheme selector plus the numeric knobs shared by the back-ends."""

    kind: str
    newton_tol: float = 1e-5
    newton_max_iter: int = 50
    gamma: float | None = None  # None: sqrt(d + 0.5), inducing uniform weights

    def __post_init__(self):
        if self.kind not in ("la", "qla", "gq", "vq"):
            raise ValueError(f"unknown scheme {self.kind!r}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")


def scheme_from_name(name: str, newton_tol: float = 1e-5,
                     newton_max_iter: int = 50, gamma: float | None = None) -> SchemeKind:
    return SchemeKind(name, newton_tol, newton_max_iter, gamma)


@dataclass(frozen=True)
class QuadratureRule:
    """The 2d+1 sigma points and weights of the precision-3 rule."""

    points: np.ndarray  # (2d+1, d): center, then +gamma spokes, then -gamma spokes
    weights: np.ndarray  # (2d+1,)
    gamma: float

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def default_gamma(d: int) -> float:
    """Spread making all 2d+1 weights equal (and hence none zero or negative)."""
    return float(np.sqrt(d + 0.5))


def build_rule(cavity: DiagGaussian, gamma: float | None = None) -> QuadratureRule:
    """Sigma points of the cavity: the center and one +/- spoke per axis.

    Weights are w_0 = 1 - d/gamma^2 at the center and 1/(2 gamma^2) on every
    spoke; they sum to one for any gamma, and the rule integrates polynomials
    of total degree <= 3 against the cavity exactly.
    """
    if not cavity.is_proper:
        raise ImproperGaussianError("quadrature rule needs a proper cavity")
    d = cavity.dim
    g = default_gamma(d) if gamma is None else float(gamma)
    mu = cavity.mean
    sigma = np.sqrt(cavity.variance)
    pts = np.tile(mu, (2 * d + 1, 1))
    offs = g * sigma
    pts[1 : d + 1] += np.diag(offs)
    pts[d + 1 :] -= np.diag(offs)
    w = np.full(2 * d + 1, 1.0 / (2.0 * g * g))
    w[0] = 1.0 - d / (g * g)
    return QuadratureRule(points=pts, weights=w, gamma=g)


def _log_values(factor, pts: np.ndarray) -> np.ndarray:
    fn = getattr(factor, "log_value_many", None)
    if fn is not None:
        return np.asarray(fn(pts), dtype=float)
    return np.array([factor.log_value(p) for p in pts], dtype=float)


def _monomials(pts: np.ndarray) -> np.ndarray:
    """Design matrix of (1, theta, theta^2) rows for a stack of points."""
    n = pts.shape[0]
    return np.hstack([np.ones((n, 1)), pts, pts * pts])


# ---------------------------------------------------------------------------
# Laplace-style schemes
# ---------------------------------------------------------------------------


def _taylor_message(theta, value, grad, hessdiag) -> DiagGaussian:
    # log g(theta') = value + grad.(theta'-theta) + 1/2 (theta'-theta)^T H (theta'-theta)
    nhp = 0.5 * hessdiag
    linear = grad - hessdiag * theta
    log_scale = value - float(grad @ theta) + 0.5 * float(hessdiag @ (theta * theta))
    return DiagGaussian(log_scale, linear, nhp)


def approx_laplace(cavity: DiagGaussian, factor, scheme: SchemeKind | None = None) -> DiagGaussian:
    """Fit the log-factor's Taylor expansion at the maximizer of cavity*factor.

    The inner maximization is damped Newton on the diagonal curvature of
    log(c*f) (the cavity precision plus the factor's Hessian diagonal),
    starting from the cavity mean, with step halving until the objective
    stops decreasing.
    """
    scheme = scheme or SchemeKind("la")
    if not cavity.is_proper:
        raise ImproperGaussianError("Laplace fitting needs a proper cavity")
    tol = scheme.newton_tol
    theta = cavity.mean.copy()
    lam = cavity.precision  # fallback curvature where the factor is nonconcave
    obj = eval_log(cavity, theta) + factor.log_value(theta)
    if not np.isfinite(obj):
        raise SchemeFailure("objective not finite at the cavity mean")

    converged = False
    for _ in range(scheme.newton_max_iter):
        grad_f, hd_f = factor.log_grad_hessdiag(theta)
        grad = cavity.linear + 2.0 * cavity.neg_half_precision * theta + grad_f
        hess = 2.0 * cavity.neg_half_precision + hd_f
        hess = np.where(hess < -1e-12, hess, -lam)
        step = -grad / hess
        if not np.all(np.isfinite(step)):
            raise SchemeFailure("non-finite Newton step in Laplace maximization")
        t = 1.0
        moved = False
        for _ in range(_MAX_HALVINGS):
            cand = theta + t * step
            val = eval_log(cavity, cand) + factor.log_value(cand)
            if np.isfinite(val) and val >= obj:
                theta, obj, moved = cand, val, True
                break
            t *= 0.5
        if not moved:
            converged = True  # no ascent available along the Newton direction
            break
        if np.all(np.abs(t * step) <= tol * np.maximum(1.0, np.abs(theta))):
            converged = True
            break
    if not converged:
        raise SchemeFailure("Laplace maximization did not converge")

    value = factor.log_value(theta)
    grad_f, hd_f = factor.log_grad_hessdiag(theta)
    msg = _taylor_message(theta, value, grad_f, hd_f)
    if not msg.is_finite():
        raise SchemeFailure("non-finite Laplace message")
    return msg


def approx_quick_laplace(cavity: DiagGaussian, factor,
                         scheme: SchemeKind | None = None) -> DiagGaussian:
    """Taylor fit of the log-factor at the cavity mean; no inner optimization."""
    if not cavity.is_proper:
        raise ImproperGaussianError("quick Laplace needs a proper cavity")
    mu = cavity.mean
    value = factor.log_value(mu)
    grad_f, hd_f = factor.log_grad_hessdiag(mu)
    if not (np.isfinite(value) and np.all(np.isfinite(grad_f)) and np.all(np.isfinite(hd_f))):
        raise SchemeFailure("non-finite factor derivatives at the cavity mean")
    return _taylor_message(mu, value, grad_f, hd_f)


# ---------------------------------------------------------------------------
# Gaussian quadrature
# ---------------------------------------------------------------------------


def quadrature_moments(cavity: DiagGaussian, factor,
                       rule: QuadratureRule | None = None,
                       gamma: float | None = None) -> MomentVector:
    """Sigma-point estimate of the order-0/1/2 moments of cavity*factor.

    The estimate is the weighted point sum scaled by the cavity's total mass,
    so it approximates the raw (unnormalized) integrals.  Moments are
    materialized in linear space; callers needing extreme masses should go
    through approx_gauss_quadrature, which keeps the scale in log form.
    """
    rule = rule or build_rule(cavity, gamma)
    logf = _log_values(factor, rule.points)
    scale = float(np.exp(cavity.log_mass))
    f = np.exp(logf)
    wf = rule.weights * f * scale
    m0 = float(np.sum(wf))
    m1 = wf @ rule.points
    m2 = wf @ (rule.points * rule.points)
    return MomentVector(m0, m1, m2)


def approx_gauss_quadrature(cavity: DiagGaussian, factor,
                            scheme: SchemeKind | None = None) -> DiagGaussian:
    """Moment-match cavity*factor from sigma-point sums, then divide the cavity out.

    Factor values are exponentiated after subtracting their maximum over the
    rule's points; the shift (and the cavity mass) is restored into the
    matched Gaussian's log scale, so nothing overflows.  The division is done
    in natural parameters (exact) and may yield an improper message.
    """
    scheme = scheme or SchemeKind("gq")
    rule = build_rule(cavity, scheme.gamma)
    logf = _log_values(factor, rule.points)
    shift = float(np.max(logf))
    if not np.isfinite(shift):
        raise SchemeFailure("factor vanishes (or is undefined) at every quadrature point")
    f = np.exp(logf - shift)
    wf = rule.weights * f
    m0 = float(np.sum(wf))
    m1 = wf @ rule.points
    m2 = wf @ (rule.points * rule.points)
    try:
        matched = moments_to_natural(MomentVector(m0, m1, m2))
    except MomentMatchError as exc:
        raise SchemeFailure(
            f"quadrature moments not matchable: {exc}",
            details={"m0": m0, "m1": m1, "m2": m2, "coordinate": exc.coordinate},
        ) from exc
    matched = DiagGaussian(
        matched.log_scale + shift + cavity.log_mass,
        matched.linear,
        matched.neg_half_precision,
    )
    return divide(matched, cavity)


# ---------------------------------------------------------------------------
# Variational quadrature
# ---------------------------------------------------------------------------


def surrogate_value_grad_hess(alpha: np.ndarray, rule: QuadratureRule, F: np.ndarray):
    """Value, gradient and Hessian of the quadrature-discretized KL surrogate.

    With Phi the (1, theta, theta^2) design matrix over the rule's points and
    F the (nonnegative, finite) factor values there:

        L(alpha)  = -alpha . Phi^T (w F) + sum_j w_j exp(Phi_j . alpha)
        grad      = Phi^T (w exp(Phi alpha)) - Phi^T (w F)
        hess      = Phi^T diag(w exp(Phi alpha)) Phi

    Exponents beyond ~709 overflow to inf; callers damp their steps to stay
    below that (the Newton loop here uses a 500 guard).
    """
    phi = _monomials(rule.points)
    alpha = np.asarray(alpha, dtype=float)
    b = phi.T @ (rule.weights * np.asarray(F, dtype=float))
    with np.errstate(over="ignore"):
        e = np.exp(phi @ alpha)
    we = rule.weights * e
    value = -float(alpha @ b) + float(np.sum(we))
    grad = phi.T @ we - b
    hess = phi.T @ (we[:, None] * phi)
    return value, grad, hess


def _fit_surrogate(phi: np.ndarray, w: np.ndarray, F: np.ndarray,
                   tol: float, max_iter: int):
    """Newton minimization of the convex surrogate; returns (alpha, info).

    ``phi`` is the design matrix in whatever coordinates the caller chose;
    exactness and the iterate path are unaffected by affine reparametrization.
    """
    b = phi.T @ (w * F)
    if not b[0] > 0:
        raise SchemeFailure("nonpositive quadrature mass; cannot fit a surrogate")
    alpha = np.zeros(phi.shape[1])
    alpha[0] = np.log(b[0])
    info = {"n_iter": 0, "grad_inf": np.inf, "data_scale": float(np.max(np.abs(b)))}
    for it in range(max_iter):
        e = np.exp(phi @ alpha)
        we = w * e
        grad = phi.T @ we - b
        hess = phi.T @ (we[:, None] * phi)
        try:
            cho = scipy.linalg.cho_factor(hess, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise SchemeFailure(f"surrogate Hessian not positive definite: {exc}") from exc
        step = scipy.linalg.cho_solve(cho, -grad)
        if not np.all(np.isfinite(step)):
            raise SchemeFailure("non-finite Newton step in surrogate fit")
        t = 1.0
        for _ in range(_MAX_HALVINGS):
            if np.max(phi @ (alpha + t * step)) <= _EXP_GUARD:
                break
            t *= 0.5
        else:
            raise SchemeFailure("surrogate exponent overflow despite step damping")
        alpha = alpha + t * step
        info["n_iter"] = it + 1
        # relative per coordinate, so a large constant term cannot mask
        # still-moving curvature coordinates
        if np.all(np.abs(t * step) <= tol * np.maximum(1.0, np.abs(alpha))):
            info["grad_inf"] = float(np.max(np.abs(phi.T @ (w * np.exp(phi @ alpha)) - b)))
            return alpha, info
    raise SchemeFailure("surrogate Newton did not converge")


def approx_variational_quadrature(cavity: DiagGaussian, factor,
                                  scheme: SchemeKind | None = None) -> DiagGaussian:
    """Minimize the discretized generalized KL over Gaussian natural parameters.

    The fit runs in cavity-standardized coordinates z = (theta - mu)/sigma
    (an exact affine reparametrization that keeps the Newton system well
    conditioned) and is mapped back afterwards; the max-shift of the factor
    values is restored into the constant coordinate.  The result is the
    message itself; no cavity division is involved.
    """
    scheme = scheme or SchemeKind("vq")
    rule = build_rule(cavity, scheme.gamma)
    d = rule.dim
    logf = _log_values(factor, rule.points)
    shift = float(np.max(logf))
    if not np.isfinite(shift):
        raise SchemeFailure("factor vanishes (or is undefined) at every quadrature point")
    F = np.exp(logf - shift)

    mu = cavity.mean
    sigma = np.sqrt(cavity.variance)
    z = (rule.points - mu) / sigma
    alpha_z, _ = _fit_surrogate(
        _monomials(z), rule.weights, F, scheme.newton_tol, scheme.newton_max_iter
    )

    # unpack log g = c0 + b.z + a.z^2 and substitute z = (theta - mu)/sigma
    c0, bz, az = alpha_z[0], alpha_z[1 : d + 1], alpha_z[d + 1 :]
    nhp = az / sigma**2
    linear = bz / sigma - 2.0 * az * mu / sigma**2
    log_scale = shift + c0 - float(np.sum(bz * mu / sigma)) + float(np.sum(az * mu**2 / sigma**2))
    msg = DiagGaussian(log_scale, linear, nhp)
    if not msg.is_finite():
        raise SchemeFailure("non-finite variational-quadrature message")
    return msg


# ---------------------------------------------------------------------------
# Diagnostics and dispatch
# ---------------------------------------------------------------------------


def generalized_kl_diagnostic(cavity: DiagGaussian, factor, message: DiagGaussian,
                              rule: QuadratureRule | None = None) -> float:
    """Quadrature estimate of the generalized KL divergence D(c*f || c*g).

    Diagnostic only; never drives updates.  Non-finite results are returned
    as such.
    """
    rule = rule or build_rule(cavity)
    logf = _log_values(factor, rule.points)
    logg = eval_log(message, rule.points)
    shift = max(float(np.max(logf)), float(np.max(logg)))
    if not np.isfinite(shift):
        return 0.0
    f = np.exp(logf - shift)
    g = np.exp(logg - shift)
    ratio = np.where(f > 0, f * (logf - logg), 0.0)
    total = float(np.sum(rule.weights * (ratio - f + g)))
    with np.errstate(over="ignore"):
        return float(np.exp(shift + cavity.log_mass)) * total


_DISPATCH = {
    "la": approx_laplace,
    "qla": approx_quick_laplace,
    "gq": approx_gauss_quadrature,
    "vq": approx_variational_quadrature,
}


def approximate(scheme: SchemeKind, cavity: DiagGaussian, factor) -> DiagGaussian:
    """Run the selected scheme on one (cavity, factor) pair."""
    return _DISPATCH[scheme.kind](cavity, factor, scheme)
