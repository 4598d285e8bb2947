"""The linearised Neumann operator H on mean-zero boundary perturbations.

For v in V_j, H(v) = (b_j'(1) + c2) v where b_j is the regular solution of

    r^2 b'' + (n-1) r b' + (lam1 r^2 - mu_j) b = 0,   b(1) = -c1,

so H is diagonal over spherical-harmonic degrees with eigenvalues alpha_j.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ball_spectrum import RadialProfile, SolverError, ball_constants, mode_profile, shoot
from .harmonics import (
    DEFAULT_TRUNCATION,
    SphereField,
    harmonic_dimension,
    laplace_eigenvalue,
    quadratic_form_field,
)

KERNEL_TOL = 1e-10


class KernelComponentError(ValueError):
    """Input has content in V_0 or V_1 where the operator is not invertible."""

    def __init__(self, message, block_norms):
        super().__init__(message)
        self.block_norms = block_norms


@dataclass(frozen=True)
class HarmonicMode:
    n: int
    j: int

    @property
    def laplace_eigenvalue(self) -> int:
        return laplace_eigenvalue(self.n, self.j)

    @property
    def dimension(self) -> int:
        return harmonic_dimension(self.n, self.j)


def _check_degree(n, j):
    if n < 2 or j < 0:
        raise ValueError(f"need n >= 2 and j >= 0, got n={n}, j={j}")
    if j == 0:
        # phi1 solves the j=0 equation with zero boundary value, so a constant
        # Dirichlet datum is not in the range (Fredholm alternative).
        raise ValueError("degree 0 is outside the domain of H (mean-zero functions only)")


def _assert_lambda_exceeds_n(n):
    k = ball_constants(n)
    if not k.lambda1 > n:
        raise SolverError(f"expected lambda1 > n, got lambda1={k.lambda1} for n={n}")


@lru_cache(maxsize=None)
def radial_mode(n: int, j: int) -> RadialProfile:
    """Regular radial factor b_j of the harmonic extension, with b_j(1) = -c1."""
    _check_degree(n, j)
    k = ball_constants(n)
    return mode_profile(n, k.lambda1, j, boundary_value=-k.c1, name=f"b_{j}(n={n})")


@lru_cache(maxsize=None)
def h_eigenvalue(n: int, j: int) -> float:
    """alpha_j = b_j'(1) + c2, read from the shooting end state."""
    _check_degree(n, j)
    _assert_lambda_exceeds_n(n)
    k = ball_constants(n)
    b1, db1 = shoot(n, k.lambda1, j)
    return float(-k.c1 * db1 / b1 + k.c2)


def h_eigenvalue_closed(n: int, j: int) -> float:
    """Closed forms for j = 1 (zero) and j = 2."""
    k = ball_constants(n)
    if j == 1:
        return 0.0
    if j == 2:
        return (n - k.lambda1) / n * k.c1
    raise ValueError("closed form only known for j = 1, 2")


def b2_closed(n: int) -> RadialProfile:
    """b_2(r) = -(lam1/n phi1 + phi1'/r)."""
    from .ball_spectrum import phi1

    p = phi1(n)
    lam = ball_constants(n).lambda1

    def f(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        # phi1'(r)/r -> phi1''(0) at the origin
        quotient = np.where(r > 0, p.deriv(r) / safe, p.deriv2(0.0))
        return -(lam / n * p.value(r) + quotient)

    return RadialProfile.from_function(n, f, name=f"b_2 closed(n={n})")


def _block_norms(field, degrees):
    return {j: field.block_norm(j) for j in degrees}


def apply_h(field: SphereField, tol: float = KERNEL_TOL) -> SphereField:
    """Apply H degree by degree.  The field must have no mean."""
    scale = max(field.norm(), 1.0)
    if field.block_norm(0) > tol * scale:
        raise KernelComponentError(
            f"field has a nonzero mean component (|V_0 block| = {field.block_norm(0):.3e})",
            _block_norms(field, [0]),
        )
    return SphereField(
        field.n,
        {j: h_eigenvalue(field.n, j) * c for j, c in field.blocks.items() if j > 0},
        field.truncation,
    )


def solve_h(rhs: SphereField, tol: float = KERNEL_TOL) -> SphereField:
    """Preimage of ``rhs`` under H orthogonal to V_0 + V_1."""
    scale = max(rhs.norm(), 1e-300)
    norms = _block_norms(rhs, [0, 1])
    if max(norms.values()) > tol * scale:
        raise KernelComponentError(
            "right-hand side is not orthogonal to V_0 + V_1: "
            + ", ".join(f"|V_{j}| = {v:.3e}" for j, v in norms.items()),
            norms,
        )
    return SphereField(
        rhs.n,
        {j: c / h_eigenvalue(rhs.n, j) for j, c in rhs.blocks.items() if j >= 2},
        rhs.truncation,
    )


def traceless_quadratic_field(Q, truncation: int = DEFAULT_TRUNCATION, atol: float = 1e-12) -> SphereField:
    """The degree-2 field Theta -> Q(Theta, Theta) - tr(Q)/n."""
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError("Q must be a square matrix")
    if not np.allclose(Q, Q.T, atol=atol, rtol=0):
        raise ValueError("Q must be symmetric")
    full = quadratic_form_field(0.5 * (Q + Q.T), truncation)
    return SphereField(full.n, {2: full.block(2)}, truncation)
