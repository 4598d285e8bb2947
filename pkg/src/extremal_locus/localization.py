"""Expansion constants, the function r and the localization function Phi.

Phi(p, eps) = R_p + eps^2 r_p with r = K1 |Riem|^2 + K2 |Ric|^2 + K3 R^2 + K4 Delta_g R.
Critical points of Phi(., eps) locate centers of small extremal domains.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ball_spectrum import ball_constants
from .curvature import H_LAPLACE, CurvatureInvariants, invariants_at, invariants_batch, richardson_jet
from .h_operator import traceless_quadratic_field
from .harmonics import DEFAULT_TRUNCATION, SphereField
from .metric_dsl import MetricSpec


@dataclass(frozen=True)
class KConstants:
    K1: float
    K2: float
    K3: float
    K4: float

    def as_tuple(self):
        return (self.K1, self.K2, self.K3, self.K4)


@dataclass(frozen=True)
class ExpansionConstants:
    """Coefficients of the small-radius expansions at one point."""

    n: int
    W0: float
    W: float
    Lambda0: float
    Lambda: float
    HatLambda0: float
    HatLambda: float
    A0: float
    A: float
    K1: float
    K2: float
    K3: float
    K4: float

    def as_dict(self):
        return asdict(self)


def _base(n):
    k = ball_constants(n)
    return k.lambda1, k.omega_n, k.c_sq, n * (n + 2) + 2 * k.lambda1


def k_constants(n: int) -> KConstants:
    """Closed forms for K1..K4 (depend on n only)."""
    lam, _, c2, D = _base(n)
    return KConstants(
        K1=(18 * c2 + lam / (10 * (n + 4))) / D,
        # sign of the lam/(n+4) term follows the assembly in _raw_r
        K2=(35.0 / 3.0 * c2 - 4 * lam / (15 * (n + 4)) + n * lam / (6 * (lam - n))) / D,
        K3=((5 * n - 3) / (3.0 * n) * c2 - lam / (6 * (n + 4)) + lam / (6 * n) - lam / (6 * (lam - n))) / D,
        K4=(6.0 / 5.0 * c2 + 3 * lam / (5 * (n + 4))) / D,
    )


def volume_coefficients(n, riem_sq, ric_sq, R, lap_R):
    """(W0, W) of eps^-n Vol(B_eps) = omega_n/n + W0 eps^2 + W eps^4."""
    om = ball_constants(n).omega_n
    W0 = -om * R / (6.0 * n * (n + 2))
    W = om / (360.0 * n * (n + 2) * (n + 4)) * (-3 * riem_sq + 8 * ric_sq + 5 * R**2 - 18 * lap_R)
    return W0, W


def eigenvalue_coefficients(n, riem_sq, ric_sq, R, lap_R):
    """(Lambda0, Lambda) of eps^2 lambda(B_eps) = lambda1 + Lambda0 eps^2 + Lambda eps^4."""
    c2 = ball_constants(n).c_sq
    L0 = -R / 6.0
    L = -c2 / (n * (n + 2)) * (3 * riem_sq + 35.0 / 18.0 * ric_sq + (5 * n - 3) / (18.0 * n) * R**2 + lap_R / 5.0)
    return L0, L


def _raw_r(n, riem_sq, ric_sq, R, lap_R):
    """r assembled from W, Lambda and the volume-normalised Hat-Lambda, with R/HatLambda0 cancelled."""
    lam, om, _, D = _base(n)
    W0, W = volume_coefficients(n, riem_sq, ric_sq, R, lap_R)
    _, L = eigenvalue_coefficients(n, riem_sq, ric_sq, R, lap_R)
    hat = L + lam * (2 * W / om - R**2 / (36.0 * n**2 * (n + 2)))
    bracket = hat + lam / (36.0 * (n + 2) * (n - lam)) * (ric_sq - R**2 / n)
    # R / HatLambda0 = -6 n (n+2) / D for every R
    return -6.0 * n * (n + 2) / D * bracket


def k_constants_assembled(n: int) -> KConstants:
    """K1..K4 read off the assembly by evaluating it on unit invariant vectors."""
    base = _raw_r(n, 0.0, 0.0, 0.0, 0.0)
    K1 = _raw_r(n, 1.0, 0.0, 0.0, 0.0) - base
    K2 = _raw_r(n, 0.0, 1.0, 0.0, 0.0) - base
    K3 = _raw_r(n, 0.0, 0.0, 1.0, 0.0) - base
    K4 = _raw_r(n, 0.0, 0.0, 0.0, 1.0) - base
    return KConstants(K1, K2, K3, K4)


def expansion_constants(n: int, inv: CurvatureInvariants) -> ExpansionConstants:
    lam, om, _, _ = _base(n)
    a, b, R, d = inv.riem_norm_sq, inv.ric_norm_sq, inv.R, inv.lap_R
    W0, W = volume_coefficients(n, a, b, R, d)
    L0, L = eigenvalue_coefficients(n, a, b, R, d)
    A0 = -W0 / om
    A = -((n + 2) * A0 * W0 + (n - 1) / 2.0 * A0**2 * om + W) / om
    K = k_constants(n)
    return ExpansionConstants(
        n=n,
        W0=W0,
        W=W,
        Lambda0=L0,
        Lambda=L,
        HatLambda0=-(R / 6.0) * (1 + 2 * lam / (n * (n + 2))),
        HatLambda=L + lam * (2 * W / om - R**2 / (36.0 * n**2 * (n + 2))),
        A0=A0,
        A=A,
        K1=K.K1,
        K2=K.K2,
        K3=K.K3,
        K4=K.K4,
    )


def r_function(n: int, inv: CurvatureInvariants) -> float:
    K = k_constants(n)
    return K.K1 * inv.riem_norm_sq + K.K2 * inv.ric_norm_sq + K.K3 * inv.R**2 + K.K4 * inv.lap_R


def r_two_path(n: int, inv: CurvatureInvariants):
    """r from R HatLambda0^{-1} [HatLambda + ...]; None when R = 0."""
    if inv.R == 0:
        return None
    lam = ball_constants(n).lambda1
    e = expansion_constants(n, inv)
    return inv.R / e.HatLambda0 * (e.HatLambda + lam / (36.0 * (n + 2) * (n - lam)) * (inv.ric_norm_sq - inv.R**2 / n))


# ----------------------------------------------------------------- Phi


def _invariant_arrays(spec: MetricSpec, X, steps):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.has_analytic_curvature:
        invs = [invariants_at(spec, x) for x in X]
    else:
        invs = invariants_batch(spec, X, **steps)
    return invs


def phi_values(spec: MetricSpec, X, eps: float, order: int = 2, steps=None) -> np.ndarray:
    """Phi(x, eps) at many points X (..., n)."""
    if order not in (0, 2):
        raise ValueError("order must be 0 or 2")
    X = np.asarray(X, dtype=float)
    flat = X.reshape(-1, spec.dim)
    invs = _invariant_arrays(spec, flat, steps or {})
    n = spec.dim
    out = np.array([inv.R + (eps**2 * r_function(n, inv) if order == 2 else 0.0) for inv in invs])
    return out.reshape(X.shape[:-1])


def phi(spec: MetricSpec, p, eps: float, order: int = 2, steps=None) -> float:
    """R_p (order 0) or R_p + eps^2 r_p (order 2)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    return float(phi_values(spec, np.asarray(p, dtype=float)[None, :], eps, order, steps)[0])


def lambda_estimate(spec: MetricSpec, p, eps: float, steps=None) -> float:
    """lambda1/eps^2 - (n(n+2) + 2 lambda1)/(6 n (n+2)) Phi(p, eps)."""
    n = spec.dim
    lam = ball_constants(n).lambda1
    return lam / eps**2 - (n * (n + 2) + 2 * lam) / (6.0 * n * (n + 2)) * phi(spec, p, eps, 2, steps)


def vbar_leading(n: int, inv: CurvatureInvariants, truncation: int = DEFAULT_TRUNCATION) -> SphereField:
    """eps^2 coefficient of the boundary perturbation: n/(12(lambda1 - n)) traceless Ric(Theta, Theta)."""
    lam = ball_constants(n).lambda1
    if not lam > n:
        raise ValueError(f"need lambda1 > n, got {lam}")
    Q = np.asarray(inv.traceless_ricci, dtype=float)
    return (n / (12.0 * (lam - n))) * traceless_quadratic_field(Q, truncation)


# -------------------------------------------------------- critical points


@dataclass
class CriticalPoint:
    point: np.ndarray
    value: float
    grad_norm: float
    hessian_eigenvalues: np.ndarray
    kind: str
    converged: bool
    iterations: int

    def as_dict(self):
        return {
            "point": self.point.tolist(),
            "value": float(self.value),
            "grad_norm": float(self.grad_norm),
            "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
            "hessian_signs": [int(s) for s in np.sign(self.hessian_eigenvalues)],
            "kind": self.kind,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass
class CriticalPointSearch:
    eps: float
    order: int
    region: list
    grid: int
    points: list = field(default_factory=list)
    constant: bool = False
    message: str = ""
    settings: dict = field(default_factory=dict)


def _classify(eigs, rel=1e-6):
    scale = max(np.max(np.abs(eigs)), 1e-300)
    signs = np.where(np.abs(eigs) <= rel * scale, 0, np.sign(eigs))
    if np.all(np.abs(eigs) <= 1e-300) or np.any(signs == 0):
        return "degenerate"
    if np.all(signs > 0):
        return "minimum"
    if np.all(signs < 0):
        return "maximum"
    return "saddle"


def phi_derivatives(spec, x, eps, order=2, h=2e-2, steps=None):
    """Value, gradient and Hessian of Phi(., eps) at x by Richardson differences."""
    n = spec.dim
    f = lambda Y: phi_values(spec, Y, eps, order, steps)
    f0, d1, d2, _ = richardson_jet(f, np.asarray(x, dtype=float)[None, :], n, h)
    return float(f0[0]), d1[:, 0], d2[:, :, 0]


def refine_critical_point(spec, x0, eps, order=2, h=2e-2, gtol=1e-8, xtol=1e-10, max_iter=30, steps=None, region=None):
    """Newton iteration on the differenced gradient of Phi(., eps)."""
    x = np.asarray(x0, dtype=float).copy()
    it = 0
    val, g, H = phi_derivatives(spec, x, eps, order, h, steps)
    converged = False
    for it in range(1, max_iter + 1):
        try:
            dx = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        # keep steps inside the search region
        if region is not None:
            lo, hi = np.array(region).T
            t = 1.0
            while np.any(x + t * dx < lo) or np.any(x + t * dx > hi):
                t *= 0.5
                if t < 1e-6:
                    break
            dx *= t
        x = x + dx
        val, g, H = phi_derivatives(spec, x, eps, order, h, steps)
        gn = float(np.linalg.norm(g))
        if gn < gtol * (1 + abs(val)) or np.linalg.norm(dx) < xtol * (1 + np.linalg.norm(x)):
            converged = True
            break
    eigs = np.linalg.eigvalsh(0.5 * (H + H.T))
    return CriticalPoint(
        point=x,
        value=val,
        grad_norm=float(np.linalg.norm(g)),
        hessian_eigenvalues=eigs,
        kind=_classify(eigs),
        converged=converged,
        iterations=it,
    )


def _default_region(spec, region, margin=0.0):
    if region is not None:
        return [tuple(map(float, r)) for r in region]
    out = []
    for lo, hi in spec.bounds:
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("chart is unbounded; pass an explicit search region")
        pad = max(0.1 * (hi - lo), margin)
        if 2 * pad >= hi - lo:
            raise ValueError(f"chart [{lo}, {hi}] is too narrow for the differencing margin {margin:g}")
        out.append((lo + pad, hi - pad))
    return out


def find_critical_points(
    spec: MetricSpec,
    eps: float,
    order: int = 2,
    region=None,
    grid: int = 21,
    h: float = 2e-2,
    gtol: float = 1e-8,
    xtol: float = 1e-10,
    max_seeds: int = 12,
    steps=None,
) -> CriticalPointSearch:
    """Grid scan of Phi(., eps) followed by Newton refinement of each candidate."""
    # Newton stencils reach h beyond a point, curvature stencils 2 h_lap more
    h_lap = (steps or {}).get("h_lap", H_LAPLACE)
    margin = 0.0 if spec.has_analytic_curvature else 1.01 * (h + 2 * h_lap)
    region = _default_region(spec, region, margin)
    n = spec.dim
    axes = [np.linspace(lo, hi, grid) for lo, hi in region]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = phi_values(spec, mesh, eps, order, steps)
    settings = {"h_newton": h, "gtol": gtol, "xtol": xtol, "max_seeds": max_seeds}
    result = CriticalPointSearch(eps=eps, order=order, region=region, grid=grid, settings=settings)
    spread = float(np.max(vals) - np.min(vals))
    if spread <= 1e-12 * (1 + float(np.max(np.abs(vals)))):
        result.constant = True
        result.message = "Phi constant; all points critical"
        return result

    grads = np.gradient(vals, *axes)
    gnorm = np.sqrt(sum(g**2 for g in grads))
    # candidates: interior local minima of |grad Phi| on the grid
    seeds = []
    it = np.ndindex(*gnorm.shape)
    for idx in it:
        if any(i == 0 or i == grid - 1 for i in idx):
            continue
        window = gnorm[tuple(slice(i - 1, i + 2) for i in idx)]
        if gnorm[idx] <= window.min():
            seeds.append((gnorm[idx], idx))
    seeds.sort()
    found = []
    for _, idx in seeds[:max_seeds]:
        cp = refine_critical_point(spec, mesh[idx], eps, order, h, gtol, xtol, steps=steps, region=region)
        lo, hi = np.array(region).T
        if not cp.converged or np.any(cp.point < lo) or np.any(cp.point > hi):
            continue
        if any(np.linalg.norm(cp.point - q.point) < 1e-6 for q in found):
            continue
        found.append(cp)
    found.sort(key=lambda c: tuple(c.point))
    result.points = found
    if not found:
        result.message = "no interior critical point found in the search region"
    return result


def metric_distance(spec: MetricSpec, p, q) -> float:
    """Length of q - p measured in g(p)."""
    d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
    g = spec.matrix(np.asarray(p, dtype=float))
    return float(math.sqrt(d @ g @ d))
