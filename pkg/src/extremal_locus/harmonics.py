"""Spherical harmonics on S^{n-1} and fields expanded over them.

Degree-j harmonics are stored as homogeneous polynomials of degree j in the
ambient coordinates.  For n = 2 the basis is cos(j t)/sqrt(pi), sin(j t)/sqrt(pi);
for n >= 3 monomials are projected off the lower-degree restrictions and
Gram-Schmidt orthonormalised in L^2(S^{n-1}).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

DEFAULT_TRUNCATION = 16


def harmonic_dimension(n: int, j: int) -> int:
    """Dimension of the space V_j of degree-j spherical harmonics on S^{n-1}."""
    if j < 0:
        return 0
    if n == 2:
        return 1 if j == 0 else 2
    full = math.comb(n + j - 1, j)
    return full - (math.comb(n + j - 3, j - 2) if j >= 2 else 0)


def laplace_eigenvalue(n: int, j: int) -> int:
    """mu_j = j (n - 2 + j), eigenvalue of -Delta on S^{n-1}."""
    return j * (n - 2 + j)


@lru_cache(maxsize=None)
def monomial_exponents(n: int, j: int) -> np.ndarray:
    """All multi-indices of total degree ``j`` in ``n`` variables, shape (N, n)."""
    out = []
    for combo in itertools.combinations_with_replacement(range(n), j):
        alpha = [0] * n
        for i in combo:
            alpha[i] += 1
        out.append(alpha)
    return np.array(out, dtype=int).reshape(-1, n)


def monomial_integral(alpha) -> np.ndarray:
    """Integral of x^alpha over S^{n-1}; ``alpha`` has shape (..., n)."""
    alpha = np.asarray(alpha)
    odd = np.any(alpha % 2 == 1, axis=-1)
    b = (alpha + 1) / 2.0
    logv = np.sum(_lgamma(b), axis=-1) - _lgamma(np.sum(b, axis=-1))
    out = 2.0 * np.exp(logv)
    return np.where(odd, 0.0, out)


_lgamma = np.vectorize(math.lgamma, otypes=[float])


def _gram(a_exps, b_exps):
    return monomial_integral(a_exps[:, None, :] + b_exps[None, :, :])


@lru_cache(maxsize=None)
def harmonic_basis(n: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of V_j as polynomial coefficients.

    Returns ``(exps, B)`` where ``exps`` is (N, n) and column k of ``B`` gives
    the monomial coefficients of the k-th basis function.
    """
    exps = monomial_exponents(n, j)
    if n == 2:
        B = np.zeros((len(exps), harmonic_dimension(2, j)))
        if j == 0:
            B[0, 0] = 1.0 / math.sqrt(2 * math.pi)
            return exps, B
        # (x + i y)^j = sum_k C(j,k) x^(j-k) (i y)^k; exps row m has y-power m
        for k in range(j + 1):
            row = np.flatnonzero(exps[:, 1] == k)[0]
            term = math.comb(j, k) * (1j) ** k
            B[row, 0] = term.real
            B[row, 1] = term.imag
        return exps, B / math.sqrt(math.pi)

    G = _gram(exps, exps)
    if j >= 2:
        low = monomial_exponents(n, j - 2)
        # |x|^2 * x^beta expressed in degree-j monomials
        index = {tuple(a): m for m, a in enumerate(exps)}
        E = np.zeros((len(exps), len(low)))
        for c, beta in enumerate(low):
            for i in range(n):
                a = beta.copy()
                a[i] += 2
                E[index[tuple(a)], c] += 1.0
        P = np.eye(len(exps)) - E @ np.linalg.solve(E.T @ G @ E, E.T @ G)
    else:
        P = np.eye(len(exps))

    dim = harmonic_dimension(n, j)
    cols = []
    for m in range(len(exps)):
        v = P[:, m].copy()
        for _ in range(2):
            for u in cols:
                v -= (u @ G @ v) * u
        nrm = math.sqrt(max(v @ G @ v, 0.0))
        base = math.sqrt(G[m, m])
        if nrm > 1e-8 * base:
            cols.append(v / nrm)
        if len(cols) == dim:
            break
    if len(cols) != dim:
        raise RuntimeError(f"harmonic basis construction lost rank (n={n}, j={j})")
    return exps, np.array(cols).T


def eval_monomials(exps, points):
    points = np.asarray(points, dtype=float)
    return np.prod(points[..., None, :] ** exps, axis=-1)


def eval_harmonics(n, j, points):
    """Values of the degree-j basis at ``points`` (shape (..., n)) -> (..., dim V_j)."""
    exps, B = harmonic_basis(n, j)
    return eval_monomials(exps, points) @ B


def sphere_quadrature(n: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Product rule on S^{n-1} exact for polynomials of total degree <= ``degree``.

    Built recursively: x_1 = t with Gauss-Jacobi weight (1 - t^2)^((n-3)/2),
    remaining coordinates sqrt(1 - t^2) times a rule on S^{n-2}.
    """
    if n == 2:
        m = degree + 1
        t = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(t), np.sin(t)], axis=-1), np.full(m, 2 * np.pi / m)
    m = degree // 2 + 1
    a = (n - 3) / 2.0
    t, w = roots_jacobi(m, a, a)
    sub_x, sub_w = sphere_quadrature(n - 1, degree)
    s = np.sqrt(1.0 - t**2)
    pts = np.concatenate(
        [np.repeat(t, len(sub_w))[:, None], (s[:, None, None] * sub_x[None, :, :]).reshape(-1, n - 1)],
        axis=1,
    )
    wts = (w[:, None] * sub_w[None, :]).ravel()
    return pts, wts


@dataclass
class SphereField:
    """A function on S^{n-1} stored as coefficient blocks per harmonic degree.

    ``blocks[j]`` holds the coefficients over the orthonormal basis of V_j.
    Degrees absent from ``blocks`` are zero.  Because the basis is
    orthonormal the L^2 norm is the Euclidean norm of all coefficients.
    """

    n: int
    blocks: dict = field(default_factory=dict)
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        clean = {}
        for j, c in self.blocks.items():
            j = int(j)
            if j > self.truncation:
                raise ValueError(f"degree {j} exceeds truncation {self.truncation}")
            c = np.asarray(c, dtype=float)
            if c.shape != (harmonic_dimension(self.n, j),):
                raise ValueError(f"block {j} must have {harmonic_dimension(self.n, j)} coefficients")
            clean[j] = c
        self.blocks = clean

    @classmethod
    def zero(cls, n, truncation=DEFAULT_TRUNCATION):
        return cls(n, {}, truncation)

    @classmethod
    def from_polynomial(cls, n, exps, coefs, degrees=None, truncation=DEFAULT_TRUNCATION):
        """Project the polynomial sum_m coefs[m] x^exps[m] onto harmonic degrees."""
        exps = np.atleast_2d(np.asarray(exps, dtype=int))
        coefs = np.asarray(coefs, dtype=float)
        top = int(exps.sum(axis=1).max())
        if degrees is None:
            degrees = range(min(top, truncation) + 1)
        blocks = {}
        for j in degrees:
            hexps, B = harmonic_basis(n, j)
            blocks[j] = coefs @ _gram(exps, hexps) @ B
        return cls(n, blocks, truncation)

    @classmethod
    def from_function(cls, n, func, max_degree, quad_degree=None, truncation=DEFAULT_TRUNCATION):
        """Project ``func`` (callable on (P, n) points) by quadrature."""
        quad_degree = quad_degree or 2 * max_degree + 8
        pts, w = sphere_quadrature(n, quad_degree)
        vals = np.asarray(func(pts), dtype=float)
        blocks = {j: (vals * w) @ eval_harmonics(n, j, pts) for j in range(max_degree + 1)}
        return cls(n, blocks, truncation)

    def block(self, j):
        return self.blocks.get(j, np.zeros(harmonic_dimension(self.n, j)))

    def degrees(self):
        return sorted(self.blocks)

    def block_norm(self, j):
        return float(np.linalg.norm(self.block(j)))

    def norm(self):
        return float(math.sqrt(sum(float(c @ c) for c in self.blocks.values())))

    def inner(self, other):
        self._check(other)
        return float(sum(self.block(j) @ other.block(j) for j in set(self.blocks) | set(other.blocks)))

    def mean(self):
        """Average value over S^{n-1}."""
        c0 = self.block(0)[0]
        return float(c0 * eval_harmonics(self.n, 0, np.eye(self.n)[:1])[0, 0])

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1])
        for j, c in self.blocks.items():
            out = out + eval_harmonics(self.n, j, points) @ c
        return out

    __call__ = evaluate

    def map_blocks(self, fn):
        return SphereField(self.n, {j: fn(j, c) for j, c in self.blocks.items()}, self.truncation)

    def _check(self, other):
        if other.n != self.n:
            raise ValueError("fields live on spheres of different dimension")

    def __add__(self, other):
        self._check(other)
        keys = set(self.blocks) | set(other.blocks)
        return SphereField(self.n, {j: self.block(j) + other.block(j) for j in keys}, max(self.truncation, other.truncation))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, s):
        return self.map_blocks(lambda j, c: s * c)

    __mul__ = __rmul__

    def __neg__(self):
        return (-1.0) * self


def quadratic_form_field(Q, truncation=DEFAULT_TRUNCATION):
    """Field Theta -> Q(Theta, Theta) on S^{n-1}, degrees 0 and 2."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    exps = monomial_exponents(n, 2)
    coefs = np.array([Q[np.flatnonzero(a)[0], np.flatnonzero(a)[-1]] * (1 if a.max() == 2 else 2) for a in exps])
    return SphereField.from_polynomial(n, exps, coefs, degrees=[0, 2], truncation=truncation)


def sphere_integral(n, func, degree=24):
    pts, w = sphere_quadrature(n, degree)
    return float(np.asarray(func(pts)) @ w)

