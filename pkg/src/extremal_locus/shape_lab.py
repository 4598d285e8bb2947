"""Star-shaped perturbations of the unit disk and their Dirichlet eigenvalues.

The domain {r < rho(theta)} is mapped from the unit disk by
x = s R(s, theta) (cos theta, sin theta) with

    R(s, theta) = rbar (1 + s^2 eta_even(theta) + s eta_odd(theta)),   eta = rho / rbar - 1,

where rbar is the mean radius and eta is split into even and odd Fourier
modes so that R(-s, theta + pi) = R(s, theta).
The map is then smooth on the doubled grid s in [-1, 1], theta in [0, 2 pi)
and the Laplacian is discretised by Chebyshev x Fourier collocation with
the usual s -> -s, theta -> theta + pi fold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev as C
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz
from scipy.sparse.linalg import ArpackNoConvergence, eigs

from .ball_spectrum import SolverError, ball_constants
from .h_operator import h_eigenvalue

N_RADIAL = 41  # odd, so s = 0 is not a node
M_ANGULAR = 64  # even, so theta + pi is a node


# ----------------------------------------------------------- domains


@dataclass(frozen=True)
class FourierSeries:
    """a0 + sum_k a_k cos k theta + b_k sin k theta."""

    cos: tuple = ()
    sin: tuple = ()
    a0: float = 0.0

    @classmethod
    def from_dict(cls, cos=None, sin=None, a0=0.0):
        cos = cos or {}
        sin = sin or {}
        top = max([0, *cos, *sin])
        return cls(
            tuple(float(cos.get(k, 0.0)) for k in range(1, top + 1)),
            tuple(float(sin.get(k, 0.0)) for k in range(1, top + 1)),
            float(a0),
        )

    @property
    def degree(self):
        return max(len(self.cos), len(self.sin))

    def _terms(self, theta, order):
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.a0 if order == 0 else 0.0)
        for k, a in enumerate(self.cos, start=1):
            out = out + a * k**order * _trig(k * theta, order, True)
        for k, b in enumerate(self.sin, start=1):
            out = out + b * k**order * _trig(k * theta, order, False)
        return out

    def __call__(self, theta):
        return self._terms(theta, 0)

    def deriv(self, theta, order=1):
        return self._terms(theta, order)

    def l2_sq(self):
        """int_0^{2pi} f^2 dtheta."""
        return 2 * math.pi * self.a0**2 + math.pi * (sum(a * a for a in self.cos) + sum(b * b for b in self.sin))


def _trig(x, order, is_cos):
    # d^order/dx^order of cos or sin
    shift = order % 4
    if is_cos:
        return [np.cos(x), -np.sin(x), -np.cos(x), np.sin(x)][shift]
    return [np.sin(x), np.cos(x), -np.sin(x), -np.cos(x)][shift]


@dataclass(frozen=True)
class PerturbedDisk:
    """Domain r < 1 + v0(t) + t vbar(theta).

    With ``volume_preserving`` the shift v0(t) solves
    (1/2) int (1 + v0 + t vbar)^2 dtheta = pi exactly; otherwise v0 = ``shift``.
    """

    vbar: FourierSeries
    t: float = 0.0
    volume_preserving: bool = True
    shift: float = 0.0

    @property
    def v0(self) -> float:
        if not self.volume_preserving:
            return self.shift
        return area_preserving_shift(self.vbar, self.t)

    def radius(self, theta):
        return 1.0 + self.v0 + self.t * self.vbar(theta)

    def radius_deriv(self, theta, order=1):
        return self.t * self.vbar.deriv(theta, order)

    def area(self, quad=4096):
        th = 2 * np.pi * np.arange(quad) / quad
        return float(0.5 * np.mean(self.radius(th) ** 2) * 2 * np.pi)

    def with_t(self, t):
        return PerturbedDisk(self.vbar, t, self.volume_preserving, self.shift)


def area_preserving_shift(vbar: FourierSeries, t: float) -> float:
    """Positive root v0 of (1/2) int (1 + v0 + t vbar)^2 dtheta = pi."""
    # pi (1+v0)^2 + (1+v0) t int vbar + (t^2/2) int vbar^2 = pi
    a = math.pi
    b = t * 2 * math.pi * vbar.a0
    c = 0.5 * t * t * vbar.l2_sq() - math.pi
    disc = b * b - 4 * a * c
    if disc < 0:
        raise ValueError("no area-preserving shift exists for this t")
    return (-b + math.sqrt(disc)) / (2 * a) - 1.0


@dataclass(frozen=True)
class StarDomain:
    """Any star-shaped domain r < rho(theta) given by a callable."""

    rho: Callable = field(compare=False)

    def radius(self, theta):
        return np.asarray(self.rho(np.asarray(theta, dtype=float)), dtype=float)


def translated_disk(shift=(0.1, 0.0), radius=1.0) -> StarDomain:
    """Disk of given radius centred at ``shift``, seen from the origin."""
    a, b = shift

    def rho(th):
        p = a * np.cos(th) + b * np.sin(th)
        q = a * a + b * b - radius**2
        return p + np.sqrt(p * p - q)

    return StarDomain(rho)


# ----------------------------------------------------------- collocation


@lru_cache(maxsize=None)
def _cheb(N):
    """Chebyshev points cos(pi i / N) and the differentiation matrix."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.ones(N + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(N + 1)
    X = np.tile(x, (N + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return x, D


@lru_cache(maxsize=None)
def _fourier(M):
    """Periodic differentiation matrix on theta_j = 2 pi j / M (M even)."""
    h = 2 * np.pi / M
    j = np.arange(M)
    col = np.zeros(M)
    col[1:] = 0.5 * (-1.0) ** j[1:] / np.tan(j[1:] * h / 2)
    D1 = toeplitz(col, -col)
    # the second-derivative matrix keeps the Nyquist mode; D1 @ D1 would
    # annihilate it and create a spurious copy of every radial eigenvalue
    col2 = np.empty(M)
    col2[0] = -np.pi**2 / (3 * h**2) - 1.0 / 6.0
    col2[1:] = -0.5 * (-1.0) ** j[1:] / np.sin(j[1:] * h / 2) ** 2
    return D1, toeplitz(col2)


def _spectral_derivs(values, M):
    """First and second theta-derivatives of periodic samples by FFT."""
    k = np.fft.fftfreq(M, d=1.0 / M)
    f = np.fft.fft(values)
    k1 = 1j * k
    k1[M // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    d1 = np.real(np.fft.ifft(k1 * f))
    d2 = np.real(np.fft.ifft(-(k**2) * f))
    return d1, d2


def _parity_split(values, M):
    k = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    f = np.fft.fft(values)
    even = np.real(np.fft.ifft(np.where(k % 2 == 0, f, 0)))
    odd = np.real(np.fft.ifft(np.where(k % 2 != 0, f, 0)))
    return even, odd


@dataclass
class Discretisation:
    N: int
    M: int
    s: np.ndarray  # full Chebyshev grid, length N+1
    theta: np.ndarray
    m: np.ndarray  # (N+1, M) radius map s R(s, theta)
    m_s: np.ndarray
    m_t: np.ndarray
    A: np.ndarray  # folded operator on interior s > 0 nodes
    half: np.ndarray  # indices of s > 0 interior nodes in the full grid
    even: np.ndarray  # even and odd Fourier parts of rho / scale - 1 at theta_j
    odd: np.ndarray
    scale: float = 1.0  # mean radius, factored out of the map


def discretise(domain, N=N_RADIAL, M=M_ANGULAR) -> Discretisation:
    if N % 2 == 0 or M % 2:
        raise ValueError("need N odd and M even")
    s, Ds = _cheb(N)
    Dt, Dt2 = _fourier(M)
    theta = 2 * np.pi * np.arange(M) / M
    rho = domain.radius(theta)
    if np.any(rho <= 0) or not np.all(np.isfinite(rho)):
        raise ValueError("radius function must be positive and finite")
    scale = float(np.mean(rho))
    ev, od = _parity_split(rho / scale - 1.0, M)
    ev1, _ = _spectral_derivs(ev, M)
    od1, _ = _spectral_derivs(od, M)
    S = s[:, None]
    m = scale * S * (1 + S**2 * ev[None, :] + S * od[None, :])
    m_s = scale * (1 + 3 * S**2 * ev[None, :] + 2 * S * od[None, :])
    m_t = scale * (S**3 * ev1[None, :] + S**2 * od1[None, :])
    if np.any(m_s <= 0):
        raise ValueError("radial map folds over; perturbation too large for this mapping")

    P = (N + 1) * M
    I_M = sp.identity(M, format="csr")
    DS = sp.kron(sp.csr_matrix(Ds), I_M, format="csr")
    DT = sp.kron(sp.identity(N + 1, format="csr"), sp.csr_matrix(Dt), format="csr")
    DT2 = sp.kron(sp.identity(N + 1, format="csr"), sp.csr_matrix(Dt2), format="csr")
    diag = lambda a: sp.diags(a.ravel())
    inner = np.arange(1, N)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_ms = 1.0 / m_s
        ratio = m_t / m_s
    Rd = diag(ratio)
    # (D_theta - ratio D_s)^2 with the exact second theta-derivative
    TT = DT2 - DT @ Rd @ DS - Rd @ DS @ DT + Rd @ DS @ Rd @ DS
    # rows at s = +-1 are discarded; 1/m is finite on every interior node
    m_safe = np.where(np.abs(m) > 0, m, 1.0)
    L = (
        diag(inv_ms) @ DS @ diag(inv_ms) @ DS
        + diag(1.0 / (m_safe * m_s)) @ DS
        + diag(1.0 / m_safe**2) @ TT
    )
    L = L.tocsr()
    # fold: value at (-s_i, theta_j) equals value at (s_i, theta_j + pi)
    half = np.arange(1, (N - 1) // 2 + 1)  # s > 0 interior nodes
    rows = (half[:, None] * M + np.arange(M)[None, :]).ravel()
    n_half = len(half) * M
    cols = []
    data = []
    rr = []
    for i in inner:
        for j in range(M):
            full = i * M + j
            if s[i] > 0:
                k = np.flatnonzero(half == i)[0] * M + j
            else:
                mirror = N - i
                k = np.flatnonzero(half == mirror)[0] * M + (j + M // 2) % M
            rr.append(full)
            cols.append(k)
            data.append(1.0)
    Pmat = sp.csr_matrix((data, (rr, cols)), shape=(P, n_half))
    A = (L[rows, :] @ Pmat).toarray()
    return Discretisation(N, M, s, theta, m, m_s, m_t, A, half, ev, od, scale)


@dataclass
class EigenResult:
    eigenvalue: float
    grad_sq_boundary: np.ndarray  # |grad u|^2 on the boundary at theta_j, u with unit L^2 norm
    theta: np.ndarray
    radius: np.ndarray
    N: int
    M: int


def solve_disk(domain, N=N_RADIAL, M=M_ANGULAR) -> EigenResult:
    """First Dirichlet eigenpair by folded collocation."""
    disc = discretise(domain, N, M)
    A = -disc.A
    # shift-invert about zero; a fixed radial start vector keeps runs deterministic
    s_half = disc.s[disc.half]
    v0 = np.repeat(np.cos(0.5 * np.pi * s_half)[:, None], disc.M, axis=1).ravel()
    try:
        vals, vecs = eigs(A, k=3, sigma=0.0, which="LM", v0=v0, tol=0.0)
    except ArpackNoConvergence as exc:
        raise SolverError(f"eigenvalue iteration did not converge: {exc}") from None
    order = np.argsort(vals.real)
    lam = float(vals[order[0]].real)
    if not np.isfinite(lam) or abs(vals[order[0]].imag) > 1e-8 * abs(lam):
        raise SolverError(f"collocation returned a non-real first eigenvalue {vals[order[0]]}")
    v = vecs[:, order[0]]
    v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
    u = _unfold(disc, v)
    norm_sq = _l2_norm_sq(disc, u)
    if u[disc.N // 2, 0] < 0:
        u = -u
    u /= math.sqrt(norm_sq)
    # boundary s = 1 is row 0 of the Chebyshev grid
    _, Ds = _cheb(disc.N)
    w_s = Ds[0] @ u
    m = disc.m[0]
    g2 = (w_s / disc.m_s[0]) ** 2 * (1 + (disc.m_t[0] / m) ** 2)
    return EigenResult(lam, g2, disc.theta, m.copy(), disc.N, disc.M)


def _unfold(disc, v):
    N, M = disc.N, disc.M
    U = np.zeros((N + 1, M))
    V = v.reshape(len(disc.half), M)
    for k, i in enumerate(disc.half):
        U[i] = V[k]
        U[N - i] = np.roll(V[k], -(M // 2))
    return U


def _l2_norm_sq(disc, U):
    """int_Omega u^2 dx by Gauss-Legendre in s on (0, 1) and the trapezoid rule in theta."""
    N, M = disc.N, disc.M
    x, w = leggauss(N + 4)
    sq = 0.5 * (x + 1)[:, None]
    wq = 0.5 * w
    coef = C.chebfit(disc.s, U, N)
    Uq = C.chebval(sq[:, 0], coef).T  # (order, M)
    ev, od = disc.even[None, :], disc.odd[None, :]
    Jq = disc.scale**2 * sq * (1 + sq**2 * ev + sq * od) * (1 + 3 * sq**2 * ev + 2 * sq * od)
    return float(np.sum(wq[:, None] * Uq**2 * Jq) * 2 * np.pi / M)


def disk_eigenvalue(domain, N=N_RADIAL, M=M_ANGULAR) -> float:
    """First Dirichlet eigenvalue of a star-shaped domain around the origin."""
    return solve_disk(domain, N, M).eigenvalue


def boundary_derivative(domain, speed, N=N_RADIAL, M=M_ANGULAR):
    """Hadamard derivative -int (d_nu u)^2 <V, N> ds for the radial speed V(theta) e_r."""
    res = solve_disk(domain, N, M)
    V = speed(res.theta)
    return float(-np.sum(res.grad_sq_boundary * V * res.radius) * 2 * np.pi / res.M)


# ----------------------------------------------------------- checks


def _five_point(f, t0, h, order):
    vals = {k: f(t0 + k * h) for k in (-2, -1, 0, 1, 2)}
    if order == 1:
        return (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * h), vals
    return (-vals[-2] + 16 * vals[-1] - 30 * vals[0] + 16 * vals[1] - vals[2]) / (12 * h * h), vals


@dataclass
class DerivativeCheck:
    finite_difference: float
    predicted: float
    step: float
    sweep: dict
    details: dict = field(default_factory=dict)

    @property
    def relative_error(self):
        return abs(self.finite_difference - self.predicted) / max(abs(self.predicted), 1e-300)

    def as_dict(self):
        return {
            "finite_difference": self.finite_difference,
            "predicted": self.predicted,
            "relative_error": self.relative_error,
            "step": self.step,
            "sweep": {repr(k): v for k, v in self.sweep.items()},
            "details": self.details,
        }


def _sweep(estimate, steps):
    """Estimates at each step; pick the one agreeing best with its neighbour."""
    est = {h: estimate(h) for h in steps}
    hs = sorted(est)
    if len(hs) == 1:
        return hs[0], est
    gaps = {hs[i]: abs(est[hs[i]] - est[hs[i + 1]]) for i in range(len(hs) - 1)}
    best = min(gaps, key=gaps.get)
    return best, est


def first_derivative_check(
    vbar: FourierSeries, volume_preserving=True, t0=0.0, steps=(2e-3, 4e-3, 8e-3, 1.6e-2), N=N_RADIAL, M=M_ANGULAR
) -> DerivativeCheck:
    """d lambda/dt along r < 1 + v0(t) + t vbar by finite differences and by the boundary integral."""
    disk = PerturbedDisk(vbar, t0, volume_preserving)
    lam = lambda t: disk_eigenvalue(disk.with_t(t), N, M)
    best, est = _sweep(lambda h: _five_point(lam, t0, h, 1)[0], steps)

    # radial speed d/dt (1 + v0(t) + t vbar) = v0'(t) + vbar
    if volume_preserving:
        dv0 = (area_preserving_shift(vbar, t0 + 1e-5) - area_preserving_shift(vbar, t0 - 1e-5)) / 2e-5
    else:
        dv0 = 0.0
    predicted = boundary_derivative(disk, lambda th: dv0 + vbar(th), N, M)
    return DerivativeCheck(est[best], predicted, best, est, {"t0": t0, "volume_preserving": volume_preserving})


def second_derivative_check(
    k: int, steps=(5e-3, 1e-2, 2e-2, 4e-2), N=N_RADIAL, M=M_ANGULAR
) -> DerivativeCheck:
    """lambda''(0) along the area-preserving family with vbar = cos k theta.

    Predicted value -2 c1 alpha_k int cos^2 = -2 c1 alpha_k pi (zero for k = 1).
    """
    if k < 1:
        raise ValueError("degree must be >= 1")
    vbar = FourierSeries.from_dict(cos={k: 1.0})
    disk = PerturbedDisk(vbar, 0.0, True)
    lam = lambda t: disk_eigenvalue(disk.with_t(t), N, M)
    best, est = _sweep(lambda h: _five_point(lam, 0.0, h, 2)[0], steps)
    c1 = ball_constants(2).c1
    alpha = h_eigenvalue(2, k)
    predicted = -2 * c1 * alpha * vbar.l2_sq()
    return DerivativeCheck(est[best], predicted, best, est, {"k": k, "alpha_k": alpha, "c1": c1})


def polar_curvature(rho, d1, d2):
    """Curvature of the polar curve r = rho(theta)."""
    return (rho**2 + 2 * d1**2 - rho * d2) / (rho**2 + d1**2) ** 1.5


@dataclass
class HenryCheck:
    volume_fd: float
    volume_formula: float
    boundary_fd: float
    boundary_formula: float
    step: float

    @property
    def volume_error(self):
        return abs(self.volume_fd - self.volume_formula) / max(abs(self.volume_formula), 1e-300)

    @property
    def boundary_error(self):
        return abs(self.boundary_fd - self.boundary_formula) / max(abs(self.boundary_formula), 1e-300)

    def as_dict(self):
        return {
            "volume_fd": self.volume_fd,
            "volume_formula": self.volume_formula,
            "volume_error": self.volume_error,
            "boundary_fd": self.boundary_fd,
            "boundary_formula": self.boundary_formula,
            "boundary_error": self.boundary_error,
            "step": self.step,
        }


def henry_formula_check(f, grad_f, vbar: FourierSeries, t0=0.05, volume_preserving=False, h=1e-3, quad=512, radial=40):
    """Finite differences of int_{Omega_t} f and int_{dOmega_t} f against the Hadamard formulas.

    ``f`` and ``grad_f`` take points of shape (..., 2).  The speed is the
    radial field V = (v0'(t) + vbar(theta)) e_r.
    """
    fam = PerturbedDisk(vbar, t0, volume_preserving)
    th = 2 * np.pi * np.arange(quad) / quad
    wt = 2 * np.pi / quad
    xg, wg = leggauss(radial)
    xg = 0.5 * (xg + 1)
    wg = 0.5 * wg

    def e_r(theta):
        return np.stack([np.cos(theta), np.sin(theta)], axis=-1)

    def vol_integral(t):
        rho = fam.with_t(t).radius(th)
        r = rho[:, None] * xg[None, :]
        pts = r[..., None] * e_r(th)[:, None, :]
        return float(np.sum(f(pts) * r * rho[:, None] * wg[None, :]) * wt)

    def bdry_integral(t):
        d = fam.with_t(t)
        rho = d.radius(th)
        d1 = d.radius_deriv(th, 1)
        return float(np.sum(f(rho[:, None] * e_r(th)) * np.sqrt(rho**2 + d1**2)) * wt)

    vol_fd = (vol_integral(t0 - 2 * h) - 8 * vol_integral(t0 - h) + 8 * vol_integral(t0 + h) - vol_integral(t0 + 2 * h)) / (12 * h)
    bd_fd = (bdry_integral(t0 - 2 * h) - 8 * bdry_integral(t0 - h) + 8 * bdry_integral(t0 + h) - bdry_integral(t0 + 2 * h)) / (12 * h)

    if volume_preserving:
        dv0 = (area_preserving_shift(vbar, t0 + 1e-5) - area_preserving_shift(vbar, t0 - 1e-5)) / 2e-5
    else:
        dv0 = 0.0
    rho = fam.radius(th)
    d1 = fam.radius_deriv(th, 1)
    d2 = fam.radius_deriv(th, 2)
    V = dv0 + vbar(th)
    er = e_r(th)
    et = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    speed = np.sqrt(rho**2 + d1**2)
    normal = (rho[:, None] * er - d1[:, None] * et) / speed[:, None]
    v_dot_n = V * rho / speed  # <V e_r, N>
    pts = rho[:, None] * er
    fv = f(pts)
    dfn = np.sum(grad_f(pts) * normal, axis=-1)
    H = polar_curvature(rho, d1, d2)
    vol_formula = float(np.sum(fv * v_dot_n * speed) * wt)
    bd_formula = float(np.sum((v_dot_n * dfn + H * v_dot_n * fv) * speed) * wt)
    return HenryCheck(vol_fd, vol_formula, bd_fd, bd_formula, h)
