"""First Dirichlet eigenpair of the unit ball and the constants built from it.

The radial problem

    phi'' + (n - 1)/r phi' + lam phi = 0,   phi regular at 0,   phi(1) = 0

is solved by shooting from a small radius with series initial data and
bracketing on ``lam``.  Profiles are stored as Chebyshev interpolants on
[0, 1] so that value, first and second derivatives are available anywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

R0 = 1e-6
RTOL = 1e-13
ATOL = 1e-15
CHEB_DEGREE = 48
SERIES_TERMS = 60


class SolverError(RuntimeError):
    """Raised when a shooting or quadrature step fails to converge."""


def sphere_area(n: int) -> float:
    """Area omega_n of the unit sphere S^{n-1} in R^n.

    Uses the ladder omega_{n+2} = 2 pi omega_n / n from omega_1 = 2 and
    omega_2 = 2 pi, so no Gamma function is needed.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    om = 2.0 if n % 2 else 2.0 * math.pi
    for k in range(2 - n % 2, n, 2):
        om *= 2.0 * math.pi / k
    return om


def unit_ball_volume(n: int) -> float:
    return sphere_area(n) / n


@dataclass(frozen=True)
class RadialProfile:
    """A radial function on [0, 1] with derivative access.

    Parameters
    ----------
    n : int
        Dimension the profile was built for.
    coef : ndarray
        Chebyshev coefficients on the domain [0, 1].
    name : str
        Label used in reports.
    ode : tuple, optional
        ``(lam, mu)`` when the profile solves
        r^2 b'' + (n-1) r b' + (lam r^2 - mu) b = 0.  The second derivative
        on [1/2, 1] is then read from the equation instead of differentiating
        the interpolant twice, which is noisy at the endpoint.
    """

    n: int
    coef: np.ndarray
    name: str = ""
    ode: tuple = None
    _d1: np.ndarray = field(init=False, repr=False, compare=False)
    _d2: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # d/dr on [0,1] is 2 d/dx on [-1,1]
        d1 = 2.0 * C.chebder(self.coef)
        object.__setattr__(self, "_d1", d1)
        object.__setattr__(self, "_d2", 2.0 * C.chebder(d1))

    @classmethod
    def from_function(cls, n, func, name="", degree=CHEB_DEGREE):
        """Interpolate ``func`` at Chebyshev points of [0, 1]."""
        x = np.cos(np.pi * np.arange(degree + 1) / degree)
        vals = np.asarray(func((x + 1.0) / 2.0), dtype=float)
        return cls(n, C.chebfit(x, vals, degree), name)

    def value(self, r):
        return C.chebval(2.0 * np.asarray(r, dtype=float) - 1.0, self.coef)

    def deriv(self, r):
        return C.chebval(2.0 * np.asarray(r, dtype=float) - 1.0, self._d1)

    def deriv2(self, r):
        r = np.asarray(r, dtype=float)
        out = C.chebval(2.0 * r - 1.0, self._d2)
        if self.ode is None:
            return out
        lam, mu = self.ode
        safe = np.maximum(r, 0.5)
        from_ode = -(self.n - 1) / safe * self.deriv(safe) - (lam - mu / safe**2) * self.value(safe)
        return np.where(r >= 0.5, from_ode, out)

    __call__ = value

    def scaled(self, factor, name=None):
        return RadialProfile(self.n, factor * self.coef, name or self.name, self.ode)

    def __add__(self, other):
        m = max(len(self.coef), len(other.coef))
        a = np.zeros(m)
        b = np.zeros(m)
        a[: len(self.coef)] = self.coef
        b[: len(other.coef)] = other.coef
        return RadialProfile(self.n, a + b, self.name)


def integrate(f, a=0.0, b=1.0, tol=1e-12, order=20, max_panels=4096):
    """Composite Gauss-Legendre quadrature with panel doubling.

    ``f`` must accept an array of abscissae.  Panels are doubled until two
    successive estimates differ by less than ``tol``.
    """
    x, w = leggauss(order)
    prev = None
    panels = 1
    while panels <= max_panels:
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
        est = float(np.sum(np.asarray(f(pts)).reshape(panels, order) * w[None, :] * half[:, None]))
        if prev is not None and abs(est - prev) < tol:
            return est
        prev = est
        panels *= 2
    raise SolverError(f"quadrature did not reach tolerance {tol} on [{a}, {b}]")


def frobenius_series(n, lam, mu, j, r, terms=12):
    """Regular solution r^j (1 + a1 r^2 + ...) of r^2 b'' + (n-1) r b' + (lam r^2 - mu) b = 0.

    ``mu`` must equal j (n - 2 + j).  Returns (b, b') at ``r``.
    """
    r = np.asarray(r, dtype=float)
    a = 1.0
    val = np.zeros_like(r)
    der = np.zeros_like(r)
    for k in range(terms):
        p = j + 2 * k
        val = val + a * r**p
        if p > 0:
            der = der + a * p * r ** (p - 1)
        # (p+2)(p+1+n-2) - mu) a_{k+1} = -lam a_k
        nxt = p + 2
        a = -lam * a / (nxt * (nxt + n - 2) - mu)
    return val, der


def shoot(n, lam, j=0, r_eval=None, r0=R0, rtol=RTOL, atol=ATOL):
    """Integrate the regular mode-``j`` solution from ``r0`` to 1.

    Returns (b(1), b'(1)) and, when ``r_eval`` is given, values at those radii.
    """
    mu = j * (n - 2 + j)

    def rhs(r, y):
        return [y[1], -(n - 1) / r * y[1] - (lam - mu / (r * r)) * y[0]]

    y0 = np.array(frobenius_series(n, lam, mu, j, r0)).ravel()
    r_eval = None if r_eval is None else np.asarray(r_eval, dtype=float)
    inside = None
    if r_eval is not None:
        inside = r_eval >= r0
        t_eval = np.sort(r_eval[inside])
        if t_eval.size == 0 or t_eval[-1] < 1.0:
            t_eval = np.append(t_eval, 1.0)
    else:
        t_eval = None
    sol = solve_ivp(rhs, (r0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol * r0**j, t_eval=t_eval)
    if not sol.success:
        raise SolverError(f"radial integration failed: {sol.message}")
    end = (sol.y[0, -1], sol.y[1, -1])
    if r_eval is None:
        return end
    vals = np.empty_like(r_eval)
    order = np.argsort(r_eval[inside])
    got = sol.y[0][: inside.sum()]
    tmp = np.empty(inside.sum())
    tmp[order] = got
    vals[inside] = tmp
    if (~inside).any():
        vals[~inside] = frobenius_series(n, lam, mu, j, r_eval[~inside])[0]
    return end, vals


def _residual(lam, n):
    return shoot(n, lam)[0]


@lru_cache(maxsize=None)
def lambda1(n: int) -> float:
    """First Dirichlet eigenvalue of the unit ball in R^n.

    Brackets the first sign change of phi(1; lam) on a geometric scan, then
    refines with Brent's method to relative accuracy 1e-12 or better.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {n}")
    n = int(n)
    lo = 0.5
    f_lo = _residual(lo, n)
    if f_lo <= 0:
        raise SolverError("lower bracket already past the first eigenvalue")
    hi = lo
    for _ in range(200):
        hi = lo * 1.2
        f_hi = _residual(hi, n)
        if f_hi < 0:
            break
        lo, f_lo = hi, f_hi
    else:
        raise SolverError(f"could not bracket the first eigenvalue for n={n}")
    return brentq(_residual, lo, hi, args=(n,), xtol=1e-15, rtol=1e-15, maxiter=200)


def _cheb_nodes01(degree=CHEB_DEGREE):
    x = np.cos(np.pi * np.arange(degree + 1) / degree)
    return x, (x + 1.0) / 2.0


def mode_profile(n, lam, j, boundary_value=None, name=""):
    """Regular solution of the mode-``j`` equation as a RadialProfile.

    With ``boundary_value`` the profile is scaled so that b(1) equals it;
    otherwise the raw Frobenius normalisation b ~ r^j is kept.
    """
    x, r = _cheb_nodes01()
    (b1, _), shot = shoot(n, lam, j, r_eval=r)
    # the series is entire in r and sums to near machine precision on [0, 1];
    # the shooting values serve as an independent check
    vals, _ = frobenius_series(n, lam, j * (n - 2 + j), j, r, terms=SERIES_TERMS)
    gap = np.max(np.abs(vals - shot)) / np.max(np.abs(vals))
    if gap > 1e-9:
        raise SolverError(f"mode {j}: series and shooting profiles disagree (relative {gap:.2e})")
    b1 = vals[0]
    if boundary_value is not None:
        if abs(b1) < 1e-300:
            raise SolverError(f"mode {j} vanishes at r=1; boundary value cannot be imposed")
        vals = vals * (boundary_value / b1)
    return RadialProfile(n, C.chebfit(x, vals, CHEB_DEGREE), name, (lam, j * (n - 2 + j)))


@lru_cache(maxsize=None)
def phi1(n: int) -> RadialProfile:
    """Positive first eigenfunction of the unit ball with unit L^2(B_1) norm."""
    lam = lambda1(n)
    raw = mode_profile(n, lam, 0)
    norm_sq = sphere_area(n) * integrate(lambda r: raw.value(r) ** 2 * r ** (n - 1))
    if not np.isfinite(norm_sq) or norm_sq <= 0:
        raise SolverError("normalisation quadrature failed")
    return raw.scaled(1.0 / math.sqrt(norm_sq), name=f"phi1(n={n})")


@dataclass(frozen=True)
class BallConstants:
    """Scalar constants attached to the unit ball in dimension ``n``.

    ``c1`` and ``c_sq`` hold the closed forms; the ``*_numeric`` fields hold
    the values read off the computed eigenfunction, and ``*_reldiff`` their
    relative disagreement.
    """

    n: int
    lambda1: float
    omega_n: float
    c1: float
    c2: float
    c_sq: float
    c1_numeric: float
    c_sq_numeric: float
    c1_reldiff: float
    c_sq_reldiff: float


@lru_cache(maxsize=None)
def ball_constants(n: int, check_tol: float = 1e-8) -> BallConstants:
    lam = lambda1(n)
    om = sphere_area(n)
    p = phi1(n)
    c1_closed = -math.sqrt(2.0 * lam / om)
    c_sq_closed = (n + 2) * (2.0 * lam + n * (n - 4)) / (12.0 * lam * om)
    c1_num = float(p.deriv(1.0))
    c_sq_num = 0.5 * (n + 2) * integrate(lambda r: p.value(r) ** 2 * r ** (n + 1))
    d1 = abs(c1_num - c1_closed) / abs(c1_closed)
    d2 = abs(c_sq_num - c_sq_closed) / abs(c_sq_closed)
    if d1 > check_tol or d2 > check_tol:
        raise SolverError(
            f"n={n}: numeric and closed-form constants disagree (c1 {d1:.2e}, c^2 {d2:.2e})"
        )
    return BallConstants(
        n=n,
        lambda1=lam,
        omega_n=om,
        c1=c1_closed,
        c2=-(n - 1) * c1_closed,
        c_sq=c_sq_closed,
        c1_numeric=c1_num,
        c_sq_numeric=c_sq_num,
        c1_reldiff=d1,
        c_sq_reldiff=d2,
    )


@lru_cache(maxsize=None)
def g2_profile(n: int) -> RadialProfile:
    """Second-order radial correction of the geodesic-ball eigenfunction.

    G2(r) = r^2 phi1(r) / (12 n) - c^2 omega_n / (6 n (n+2)) phi1(r).
    """
    p = phi1(n)
    k = ball_constants(n)
    shift = k.c_sq * k.omega_n / (6.0 * n * (n + 2))
    return RadialProfile.from_function(
        n, lambda r: r**2 * p.value(r) / (12.0 * n) - shift * p.value(r), name=f"G2(n={n})"
    )
