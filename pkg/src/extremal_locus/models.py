"""Builtin model metrics.

Space forms and the product S^{n-1}(a) x S^1(b) carry closed-form curvature;
their charts are also available as expression documents so the two paths
can be compared.
"""
from __future__ import annotations

import math

import numpy as np

from .metric_dsl import Builtin, MetricSpec

INF = math.inf


def _polar_warp(x, warp):
    """Diagonal of a(r)^2-free polar metric: [1, w(x1)^2, w^2 sin^2 x2, ...]."""
    n = x.shape[-1]
    d = np.ones(x.shape)
    if n > 1:
        d[..., 1] = warp(x[..., 0]) ** 2
        for k in range(2, n):
            d[..., k] = d[..., k - 1] * np.sin(x[..., k - 1]) ** 2
    return d


def _diag_matrix(d):
    n = d.shape[-1]
    out = np.zeros(d.shape + (n,))
    idx = np.arange(n)
    out[..., idx, idx] = d
    return out


def _polar_text(n, scale_sq, warp_name):
    lines = [f"dim {n};"]
    factors = []
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            if i != j:
                lines.append(f"g{i}{j} = 0;")
                continue
            if i == 1:
                lines.append(f"g11 = {scale_sq};")
            else:
                if i == 2:
                    factors = [f"{warp_name}(x1)^2"]
                else:
                    factors.append(f"sin(x{i - 1})^2")
                lines.append(f"g{i}{i} = {scale_sq}*" + "*".join(factors) + ";")
    return lines


def _conformal_text(n, numerator, sign):
    r2 = " + ".join(f"x{k}^2" for k in range(1, n + 1))
    lines = [f"dim {n};"]
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            expr = f"({numerator}/(1 {sign} ({r2})))^2" if i == j else "0"
            lines.append(f"g{i}{j} = {expr};")
    return lines


def _bounds_text(bounds):
    out = []
    for k, (lo, hi) in enumerate(bounds, start=1):
        if math.isfinite(lo) or math.isfinite(hi):
            out.append(f"bounds x{k} = [{lo!r}, {hi!r}];")
    return out


def space_form_invariants(n, kappa):
    """Closed-form curvature of constant sectional curvature ``kappa``."""
    from .curvature import CurvatureInvariants

    eye = np.eye(n)
    riem = kappa * (np.einsum("ij,kl->ikjl", eye, eye) - np.einsum("il,kj->ikjl", eye, eye))
    ric = (n - 1) * kappa * eye
    R = n * (n - 1) * kappa
    inv = CurvatureInvariants(
        R=R,
        riem_norm_sq=2 * n * (n - 1) * kappa**2,
        ric_norm_sq=n * (n - 1) ** 2 * kappa**2,
        lap_R=0.0,
        ricci=ric,
        traceless_ricci=np.zeros((n, n)),
        method="analytic",
    )
    return inv, riem


def _space_form(tag, params, n, kappa, metric, bounds, text_lines):
    text = "\n".join(text_lines + _bounds_text(bounds)) + "\n"
    b = Builtin(
        tag=tag,
        params=params,
        dim=n,
        metric=metric,
        bounds=tuple(bounds),
        curvature=kappa,
        analytic=lambda x: space_form_invariants(n, kappa),
        expression_text=text,
    )
    return MetricSpec(dim=n, builtin=b, bounds=tuple(bounds))


def euclidean(n=2):
    bounds = [(-INF, INF)] * n
    lines = [f"dim {n};"] + [
        f"g{i}{j} = {1 if i == j else 0};" for i in range(1, n + 1) for j in range(i, n + 1)
    ]
    return _space_form(
        "euclidean", (n,), n, 0.0, lambda x: _diag_matrix(np.ones(x.shape)), bounds, lines
    )


def flat_torus(periods=(1.0, 1.0)):
    periods = tuple(float(p) for p in periods)
    n = len(periods)
    bounds = [(0.0, p) for p in periods]
    lines = [f"dim {n};"] + [
        f"g{i}{j} = {1 if i == j else 0};" for i in range(1, n + 1) for j in range(i, n + 1)
    ]
    return _space_form(
        "flat_torus", periods, n, 0.0, lambda x: _diag_matrix(np.ones(x.shape)), bounds, lines
    )


def sphere(a=1.0, n=2, chart="polar"):
    """Round sphere of radius ``a``.

    ``polar``: hyperspherical angles, x1..x_{n-1} in (0, pi).
    ``stereographic``: conformal factor (2a / (1 + |x|^2))^2.
    """
    a = float(a)
    kappa = 1.0 / a**2
    if chart == "polar":
        bounds = [(0.0, math.pi)] * (n - 1) + [(-INF, INF)]
        metric = lambda x: _diag_matrix(a**2 * _polar_warp(x, np.sin))
        lines = _polar_text(n, repr(a**2), "sin")
    elif chart == "stereographic":
        bounds = [(-INF, INF)] * n
        metric = lambda x: _diag_matrix(
            np.broadcast_to(((2 * a / (1 + np.sum(x**2, axis=-1))) ** 2)[..., None], x.shape).copy()
        )
        lines = _conformal_text(n, repr(2 * a), "+")
    else:
        raise ValueError(f"unknown sphere chart {chart!r}")
    return _space_form("sphere", (a, n, chart), n, kappa, metric, bounds, lines)


def hyperbolic(a=1.0, n=2, chart="polar"):
    """Hyperbolic space of curvature -1/a^2 (geodesic polar or Poincare ball chart)."""
    a = float(a)
    kappa = -1.0 / a**2
    if chart == "polar":
        bounds = [(0.0, INF)] + [(0.0, math.pi)] * (n - 2) + ([(-INF, INF)] if n > 1 else [])
        bounds = bounds[:n]
        metric = lambda x: _diag_matrix(a**2 * _polar_warp(x, np.sinh))
        lines = _polar_text(n, repr(a**2), "sinh")
    elif chart == "poincare":
        bounds = [(-1.0, 1.0)] * n
        metric = lambda x: _diag_matrix(
            np.broadcast_to(((2 * a / (1 - np.sum(x**2, axis=-1))) ** 2)[..., None], x.shape).copy()
        )
        lines = _conformal_text(n, repr(2 * a), "-")
    else:
        raise ValueError(f"unknown hyperbolic chart {chart!r}")
    return _space_form("hyperbolic", (a, n, chart), n, kappa, metric, bounds, lines)


def product_sphere_circle(a=1.0, b=1.0, n=3):
    """S^{n-1}(a) x S^1(b): polar chart on the sphere factor, arclength angle on the circle."""
    if n < 3:
        raise ValueError("product_sphere_circle needs n >= 3")
    a, b = float(a), float(b)
    m = n - 1

    def metric(x):
        d = np.empty(x.shape)
        d[..., :m] = a**2 * _polar_warp(x[..., :m], np.sin)
        d[..., m] = b**2
        return _diag_matrix(d)

    def analytic(x):
        from .curvature import CurvatureInvariants

        k = 1.0 / a**2
        eye = np.zeros((n, n))
        eye[:m, :m] = np.eye(m)
        riem = k * (np.einsum("ij,kl->ikjl", eye, eye) - np.einsum("il,kj->ikjl", eye, eye))
        ric = (m - 1) * k * eye
        R = m * (m - 1) * k
        inv = CurvatureInvariants(
            R=R,
            riem_norm_sq=2 * m * (m - 1) * k**2,
            ric_norm_sq=m * (m - 1) ** 2 * k**2,
            lap_R=0.0,
            ricci=ric,
            traceless_ricci=ric - R / n * np.eye(n),
            method="analytic",
        )
        return inv, riem

    bounds = [(0.0, math.pi)] * (m - 1) + [(-INF, INF), (-INF, INF)]
    lines = _polar_text(m, repr(a**2), "sin")
    lines = [f"dim {n};"] + lines[1:]
    for i in range(1, m + 1):
        lines.append(f"g{i}{n} = 0;")
    lines.append(f"g{n}{n} = {b**2!r};")
    text = "\n".join(lines + _bounds_text(bounds)) + "\n"
    bi = Builtin(
        tag="product_sphere_circle",
        params=(a, b, n),
        dim=n,
        metric=metric,
        bounds=tuple(bounds),
        analytic=analytic,
        expression_text=text,
    )
    return MetricSpec(dim=n, builtin=bi, bounds=tuple(bounds))


def bump(x, center, width, power=8):
    """Compactly supported polynomial bump (1 - |x - c|^2 / w^2)_+^power."""
    q = 1.0 - np.sum((x - np.asarray(center)) ** 2, axis=-1) / width**2
    return np.where(q > 0, np.maximum(q, 0.0) ** power, 0.0)


def perturbed_sphere(a=1.0, amplitude=0.2, center=(0.8, 0.0), width=1.5, n=2):
    """Stereographic round metric of radius ``a`` times (1 + amplitude * bump)^2.

    An off-origin bump makes the critical points of R and of the order-2
    localization function differ, which the localization tests need.
    """
    a = float(a)
    center = np.asarray(center, dtype=float)
    if center.shape != (n,):
        raise ValueError(f"bump center must have {n} coordinates")

    def metric(x):
        f = (2 * a / (1 + np.sum(x**2, axis=-1))) ** 2 * (1 + amplitude * bump(x, center, width)) ** 2
        return _diag_matrix(np.broadcast_to(f[..., None], x.shape).copy())

    bounds = [(-3.0, 3.0)] * n
    bi = Builtin(
        tag="perturbed_sphere",
        params=(a, float(amplitude), tuple(center.tolist()), float(width), n),
        dim=n,
        metric=metric,
        bounds=tuple(bounds),
    )
    return MetricSpec(dim=n, builtin=bi, bounds=tuple(bounds))


BUILTINS = {
    "euclidean": euclidean,
    "sphere": sphere,
    "hyperbolic": hyperbolic,
    "flat_torus": flat_torus,
    "product_sphere_circle": product_sphere_circle,
    "perturbed_sphere": perturbed_sphere,
}


def builtin(tag, **params):
    try:
        factory = BUILTINS[tag]
    except KeyError:
        raise ValueError(f"unknown builtin metric {tag!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)
