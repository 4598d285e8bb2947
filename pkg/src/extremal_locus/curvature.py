"""Levi-Civita connection, curvature tensors and invariants on a chart.

Convention: Riem(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z and,
in a g-orthonormal frame E_1..E_n,

    riem[i, k, j, l] = g(Riem(E_k, E_i) E_j, E_l),

so that a space form of curvature kappa has
riem[i, k, j, l] = kappa (delta_ij delta_kl - delta_il delta_kj) and the
normal-coordinate metric starts g_ij = delta_ij - riem[i,k,j,l] x^k x^l / 3.

Metric derivatives use second-order central differences at steps h and h/2
combined by one Richardson level (fourth order overall).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric_dsl import MetricDomainError, MetricSpec

H_METRIC = 1e-3
H_LAPLACE = 8e-2
RICHARDSON_TOL = 1e-2
LAPLACE_LEVELS = 2


class CurvatureError(RuntimeError):
    """Finite differencing failed (bad margin, singular metric, unstable steps)."""


@dataclass
class CurvatureInvariants:
    """Pointwise curvature invariants, tensors in a g-orthonormal frame."""

    R: float
    riem_norm_sq: float
    ric_norm_sq: float
    lap_R: float
    ricci: np.ndarray
    traceless_ricci: np.ndarray
    method: str = "finite-difference"
    steps: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.ricci.shape[0]

    def as_dict(self):
        return {
            "R": float(self.R),
            "riem_norm_sq": float(self.riem_norm_sq),
            "ric_norm_sq": float(self.ric_norm_sq),
            "lap_R": float(self.lap_R),
            "ricci": np.asarray(self.ricci).tolist(),
            "traceless_ricci": np.asarray(self.traceless_ricci).tolist(),
            "method": self.method,
            "steps": dict(self.steps),
        }


# ------------------------------------------------------------- differencing


def _stencil(n, h):
    """Offsets for value, first and second derivatives by central differences."""
    eye = np.eye(n)
    offs = [np.zeros(n)]
    for i in range(n):
        offs += [h * eye[i], -h * eye[i]]
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1, -1):
                for sj in (1, -1):
                    offs.append(h * (si * eye[i] + sj * eye[j]))
    return np.array(offs)


def _central(vals, n, h):
    """First and second partials from values on ``_stencil(n, h)``.

    ``vals`` has shape (S, P, ...) with S stencil points.
    """
    f0 = vals[0]
    d1 = np.empty((n,) + f0.shape)
    d2 = np.empty((n, n) + f0.shape)
    for i in range(n):
        fp, fm = vals[1 + 2 * i], vals[2 + 2 * i]
        d1[i] = (fp - fm) / (2 * h)
        d2[i, i] = (fp - 2 * f0 + fm) / h**2
    k = 1 + 2 * n
    for i in range(n):
        for j in range(i + 1, n):
            fpp, fpm, fmp, fmm = vals[k : k + 4]
            k += 4
            d2[i, j] = d2[j, i] = (fpp - fpm - fmp + fmm) / (4 * h**2)
    return f0, d1, d2


def richardson_jet(func, X, n, h, levels=1):
    """Value, gradient and Hessian of ``func`` at points ``X`` (P, n).

    ``func`` maps (..., n) -> (..., *shape).  Central differences at steps
    h, h/2, ..., h/2^levels are combined by Richardson extrapolation in h^2.
    Returns d1 (n, P, ...), d2 (n, n, P, ...) with derivative axes first,
    plus the relative disagreement between the last two table entries.
    """
    rows = []
    for k in range(levels + 1):
        step = h / 2**k
        offs = _stencil(n, step)
        pts = X[None, :, :] + offs[:, None, :]
        _, d1, d2 = _central(np.asarray(func(pts)), n, step)
        row = [(d1, d2)]
        for j in range(1, k + 1):
            f = 4.0**j
            a, b = row[j - 1], rows[k - 1][j - 1]
            row.append(((f * a[0] - b[0]) / (f - 1), (f * a[1] - b[1]) / (f - 1)))
        rows.append(row)
    f0 = np.asarray(func(X))
    d1, d2 = rows[-1][-1]
    prev = rows[-1][-2]
    scale = max(np.max(np.abs(f0)), np.max(np.abs(d1)), np.max(np.abs(d2)), 1e-300)
    gap = max(np.max(np.abs(d1 - prev[0])), np.max(np.abs(d2 - prev[1]))) / scale
    return f0, d1, d2, float(gap)


def _check_points(spec: MetricSpec, X, margin):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != spec.dim:
        raise ValueError(f"points must have {spec.dim} coordinates")
    ok = spec.in_bounds(X, margin=margin)
    if not np.all(ok):
        bad = X[~ok][0]
        raise MetricDomainError(
            f"point {bad.tolist()} is within {margin:g} of the chart boundary {spec.bounds}; "
            "finite differences need that margin"
        )
    return X


def metric_jet(spec: MetricSpec, X, h=H_METRIC, levels=1):
    """g, dg[m,i,j] = d_m g_ij and ddg[m,p,i,j] at points X (P, n)."""
    n = spec.dim
    X = _check_points(spec, X, h)
    g, d1, d2, gap = richardson_jet(spec.matrix, X, n, h, levels)
    if not np.all(np.isfinite(d2)) or gap > RICHARDSON_TOL:
        raise CurvatureError(f"step-h and step-h/2 derivatives disagree (relative {gap:.2e}); h={h} is unstable")
    dg = np.moveaxis(d1, 0, 1)  # (P, m, i, j)
    ddg = np.moveaxis(d2, 2, 0)  # (P, m, p, i, j)
    return g, dg, ddg, gap


def _inverse(g):
    cond = np.linalg.cond(g)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1e12):
        raise CurvatureError(f"near-singular metric (condition number {np.max(cond):.3e})")
    return np.linalg.inv(g)


def _connection(g, dg):
    """Gamma of the first kind G[l,i,j] and second kind Gam[k,i,j] (batched on axis 0)."""
    # G_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    G = 0.5 * (
        np.einsum("pijl->plij", dg) + np.einsum("pjil->plij", dg) - dg
    )
    ginv = _inverse(g)
    Gam = np.einsum("pkl,plij->pkij", ginv, G)
    return G, Gam, ginv


def christoffel(spec: MetricSpec, x, h=H_METRIC) -> np.ndarray:
    """Gamma^k_ij at one chart point, array indexed [k, i, j]."""
    g, dg, _, _ = metric_jet(spec, np.asarray(x, dtype=float)[None, :], h)
    return _connection(g, dg)[1][0]


def _coordinate_riemann(g, dg, ddg):
    """Rc[a,b,c,d] = g(Riem(d_a, d_b) d_c, d_d), batched on axis 0."""
    G, Gam, _ = _connection(g, dg)
    # d_a G_{d b c} with G_{lij} = (d_i g_jl + d_j g_il - d_l g_ij)/2
    dG = 0.5 * (
        np.einsum("pabcd->padbc", ddg)  # d_a d_b g_cd
        + np.einsum("pacbd->padbc", ddg)  # d_a d_c g_bd
        - ddg  # d_a d_d g_bc
    )
    # term: d_a G_dbc - d_b G_dac
    term1 = np.einsum("padbc->pabcd", dG) - np.einsum("pbdac->pabcd", dG)
    # g_de d_a Gam^e_bc = d_a G_dbc - (d_a g_de) Gam^e_bc
    term2 = -np.einsum("pade,pebc->pabcd", dg, Gam) + np.einsum("pbde,peac->pabcd", dg, Gam)
    # g_de (Gam^f_bc Gam^e_af - Gam^f_ac Gam^e_bf) = Gam^f_bc G_daf - Gam^f_ac G_dbf
    term3 = np.einsum("pfbc,pdaf->pabcd", Gam, G) - np.einsum("pfac,pdbf->pabcd", Gam, G)
    return term1 + term2 + term3


def orthonormal_frame(g):
    """Columns F[:, a] = E_a from Gram-Schmidt on coordinate vectors (g = L L^T, F = L^{-T})."""
    L = np.linalg.cholesky(g)
    return np.linalg.inv(np.swapaxes(L, -1, -2))


def frame_curvature(g, dg, ddg):
    """Riemann as riem[i,k,j,l] in the orthonormal frame, plus Ricci and R."""
    Rc = _coordinate_riemann(g, dg, ddg)
    F = orthonormal_frame(g)
    T = np.einsum("pabcd,pae,pbf,pcq,pds->pefqs", Rc, F, F, F, F, optimize=True)
    riem = np.einsum("pkijl->pikjl", T)
    # Ric(Y, Z) = sum_a g(Riem(E_a, Y) Z, E_a) = sum_a T[a, Y, Z, a]
    ric = np.einsum("pabca->pbc", T)
    R = np.einsum("pbb->p", ric)
    return riem, ric, R, F


def scalar_curvature_field(spec: MetricSpec, X, h=H_METRIC, levels=1):
    """R at each row of X (..., n)."""
    X = np.asarray(X, dtype=float)
    flat = X.reshape(-1, spec.dim)
    g, dg, ddg, _ = metric_jet(spec, flat, h, levels)
    _, _, R, _ = frame_curvature(g, dg, ddg)
    return R.reshape(X.shape[:-1])


def laplacian(func, spec: MetricSpec, X, h=H_LAPLACE, h_metric=H_METRIC, levels=LAPLACE_LEVELS):
    """Delta_g f = g^ij (d_i d_j f - Gamma^k_ij d_k f) at points X (P, n)."""
    n = spec.dim
    X = _check_points(spec, X, h)
    f0, d1, d2, gap = richardson_jet(func, X, n, h, levels)
    g, dg, _, _ = metric_jet(spec, X, h_metric)
    _, Gam, ginv = _connection(g, dg)
    grad = np.moveaxis(d1, 0, -1)  # (P, n)
    hess = np.moveaxis(np.moveaxis(d2, 0, -1), 0, -1)  # (P, n, n)
    return np.einsum("pij,pij->p", ginv, hess - np.einsum("pkij,pk->pij", Gam, grad)), gap


def _invariants_batch(spec: MetricSpec, X, h=H_METRIC, h_lap=H_LAPLACE, with_laplacian=True):
    X = _check_points(spec, X, max(h, 2 * h_lap if with_laplacian else 0))
    g, dg, ddg, gap = metric_jet(spec, X, h)
    riem, ric, R, F = frame_curvature(g, dg, ddg)
    lap = np.zeros(len(X))
    lap_gap = 0.0
    if with_laplacian:
        # nested differencing amplifies roundoff like 1/h^4, so the inner R
        # field also uses the wide step and both use an extra Richardson level
        lap, lap_gap = laplacian(
            lambda Y: scalar_curvature_field(spec, Y, h_lap, LAPLACE_LEVELS), spec, X, h_lap, h, LAPLACE_LEVELS
        )
    return dict(riem=riem, ric=ric, R=R, lap=lap, gap=gap, lap_gap=lap_gap)


def riemann(spec: MetricSpec, x, h=H_METRIC) -> np.ndarray:
    """riem[i,k,j,l] = g(Riem(E_k, E_i) E_j, E_l) in the Gram-Schmidt frame."""
    x = np.asarray(x, dtype=float)
    if spec.has_analytic_curvature:
        return spec.builtin.analytic(x)[1]
    g, dg, ddg, _ = metric_jet(spec, x[None, :], h)
    return frame_curvature(g, dg, ddg)[0][0]


def _pack(n, riem, ric, R, lap, method, steps):
    ric = 0.5 * (ric + ric.T)
    return CurvatureInvariants(
        R=float(R),
        riem_norm_sq=float(np.sum(riem**2)),
        ric_norm_sq=float(np.sum(ric**2)),
        lap_R=float(lap),
        ricci=ric,
        traceless_ricci=ric - R / n * np.eye(n),
        method=method,
        steps=steps,
    )


def invariants_at(
    spec: MetricSpec, x, h=H_METRIC, h_lap=H_LAPLACE, force_numeric=False
) -> CurvatureInvariants:
    """All pointwise invariants at ``x``; analytic builtins skip differencing."""
    x = np.asarray(x, dtype=float)
    if spec.has_analytic_curvature and not force_numeric:
        if not spec.in_bounds(x):
            raise MetricDomainError(f"point {x.tolist()} is outside the chart bounds {spec.bounds}")
        return spec.builtin.analytic(x)[0]
    return invariants_batch(spec, x[None, :], h, h_lap)[0]


def invariants_batch(spec: MetricSpec, X, h=H_METRIC, h_lap=H_LAPLACE) -> list:
    """invariants_at for many points with shared vectorised differencing."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = _invariants_batch(spec, X, h, h_lap)
    steps = {"h_metric": h, "h_laplacian": h_lap, "richardson_gap": out["gap"], "richardson_gap_laplacian": out["lap_gap"]}
    return [
        _pack(spec.dim, out["riem"][p], out["ric"][p], out["R"][p], out["lap"][p], "finite-difference", steps)
        for p in range(len(X))
    ]


def normal_jet(inv: CurvatureInvariants, riem, order=2, locally_symmetric=False):
    """Truncated normal-coordinate metric x -> g_ij(x).

    Order 2 keeps -riem[i,k,j,l] x^k x^l / 3.  Order 4 adds
    (2/45) sum_p riem[i,k,p,l] riem[j,m,p,s] x^k x^l x^m x^s and needs a
    locally symmetric metric since derivative-of-curvature terms are dropped.
    """
    riem = np.asarray(riem, dtype=float)
    n = riem.shape[0]
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    if order == 4 and not locally_symmetric:
        raise ValueError("order-4 jet requires locally_symmetric=True (covariant derivatives of curvature are not computed)")

    def g(x):
        x = np.asarray(x, dtype=float)
        q = np.einsum("ikjl,...k,...l->...ij", riem, x, x)
        out = np.eye(n) - q / 3.0
        if order == 4:
            out = out + (2.0 / 45.0) * np.einsum("...ip,...jp->...ij", q, q)
        return out

    return g
