import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from extremal_locus.ball_spectrum import ball_constants, lambda1
from extremal_locus.shape_lab import (
    FourierSeries,
    PerturbedDisk,
    StarDomain,
    area_preserving_shift,
    disk_eigenvalue,
    first_derivative_check,
    henry_formula_check,
    polar_curvature,
    second_derivative_check,
    solve_disk,
    translated_disk,
)

LAM = lambda1(2)


def unit_disk():
    return PerturbedDisk(FourierSeries(), 0.0)


# ------------------------------------------------------------------- domains


def test_fourier_series_derivatives():
    f = FourierSeries.from_dict(cos={1: 0.5, 3: -0.2}, sin={2: 0.7}, a0=0.1)
    th = np.linspace(0, 2 * np.pi, 50)
    exact = 0.1 + 0.5 * np.cos(th) - 0.2 * np.cos(3 * th) + 0.7 * np.sin(2 * th)
    assert_allclose(f(th), exact, atol=1e-15)
    assert_allclose(f.deriv(th, 1), -0.5 * np.sin(th) + 0.6 * np.sin(3 * th) + 1.4 * np.cos(2 * th), atol=1e-14)
    assert_allclose(f.deriv(th, 2), -0.5 * np.cos(th) + 1.8 * np.cos(3 * th) - 2.8 * np.sin(2 * th), atol=1e-14)
    assert f.degree == 3
    assert_allclose(f.l2_sq(), 2 * np.pi * 0.01 + np.pi * (0.25 + 0.04 + 0.49))


@settings(max_examples=30)
@given(
    st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=5),
    st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=5),
    st.floats(0.0, 0.5),
)
def test_area_preservation(cos, sin, t):
    vbar = FourierSeries(tuple(cos), tuple(sin), 0.05)
    d = PerturbedDisk(vbar, t)
    assert_allclose(d.area(), math.pi, rtol=1e-10)
    assert_allclose(area_preserving_shift(vbar, 0.0), 0.0, atol=1e-15)


def test_polar_curvature_of_circle():
    rho = np.full(5, 2.0)
    assert_allclose(polar_curvature(rho, 0 * rho, 0 * rho), 0.5)


# --------------------------------------------------------------- eigenvalues


def test_unit_disk_eigenvalue():
    res = solve_disk(unit_disk())
    assert_allclose(res.eigenvalue, LAM, rtol=1e-8)
    # |grad u|^2 on the circle equals c1^2 for the unit-norm eigenfunction
    assert_allclose(res.grad_sq_boundary, ball_constants(2).c1 ** 2, rtol=1e-7)


@pytest.mark.parametrize("rho", [0.5, 1.3])
def test_dilation(rho):
    disk = PerturbedDisk(FourierSeries(), 0.0, volume_preserving=False, shift=rho - 1)
    assert_allclose(disk_eigenvalue(disk), LAM / rho**2, rtol=1e-8)


def test_translated_disk():
    for shift in [(0.1, 0.0), (0.05, -0.12)]:
        assert_allclose(disk_eigenvalue(translated_disk(shift)), LAM, rtol=1e-8)
    th = np.linspace(0, 2 * np.pi, 9)
    pts = translated_disk((0.1, 0.2)).radius(th)[:, None] * np.c_[np.cos(th), np.sin(th)]
    assert_allclose(np.linalg.norm(pts - [0.1, 0.2], axis=1), 1.0)


def test_resolution_doubling():
    d = PerturbedDisk(FourierSeries.from_dict(cos={2: 0.1}, sin={3: 0.05}), 1.0)
    coarse = disk_eigenvalue(d, N=21, M=32)
    a = disk_eigenvalue(d)
    b = disk_eigenvalue(d, N=81, M=128)
    assert abs(a - b) < 1e-9 * b
    # spectral convergence: each doubling cuts the error by far more than 10
    assert abs(a - b) < 0.1 * abs(coarse - b)


def test_ellipse_rotation_and_faber_krahn():
    # same area as the unit disk, so the eigenvalue exceeds the disk value
    a, b = 1.2, 1 / 1.2
    ell = StarDomain(lambda th: a * b / np.sqrt((b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2))
    rot = StarDomain(lambda th: a * b / np.sqrt((b * np.sin(th)) ** 2 + (a * np.cos(th)) ** 2))
    lam = disk_eigenvalue(ell)
    assert lam > LAM
    assert_allclose(disk_eigenvalue(rot), lam, rtol=1e-9)


# ------------------------------------------------------- shape derivatives


def test_first_derivative_cos3_vanishes():
    chk = first_derivative_check(FourierSeries.from_dict(cos={3: 1.0}))
    assert abs(chk.finite_difference) < 1e-8
    assert abs(chk.predicted) < 1e-8


def test_first_derivative_dilation():
    chk = first_derivative_check(FourierSeries(a0=1.0), volume_preserving=False)
    assert_allclose(chk.finite_difference, -2 * LAM, rtol=1e-7)
    assert_allclose(chk.predicted, -2 * LAM, rtol=1e-7)


@pytest.mark.parametrize("seed", [0, 1])
def test_first_derivative_random_family(seed):
    rng = np.random.default_rng(seed)
    deg = 5
    vbar = FourierSeries(tuple(0.2 * rng.standard_normal(deg)), tuple(0.2 * rng.standard_normal(deg)), 0.1)
    chk = first_derivative_check(vbar, volume_preserving=False, t0=0.1)
    assert chk.relative_error < 1e-3
    assert chk.as_dict()["relative_error"] == chk.relative_error


def test_second_derivative_translation_mode_vanishes():
    chk = second_derivative_check(1)
    assert abs(chk.predicted) < 1e-10
    assert abs(chk.finite_difference) < 1e-6


def test_second_derivative_k2():
    chk = second_derivative_check(2)
    assert chk.relative_error < 5e-3
    # the ball is a local minimiser among area-preserving perturbations
    assert chk.finite_difference > 0


def test_second_derivative_rejects_k0():
    with pytest.raises(ValueError):
        second_derivative_check(0)


# ------------------------------------------------------------------- Henry


def _quad_f(P):
    return P[..., 0] ** 2 + 0.5 * P[..., 1]


def _quad_grad(P):
    return np.stack([2 * P[..., 0], np.full(P.shape[:-1], 0.5)], axis=-1)


@pytest.mark.parametrize("vp", [False, True])
def test_henry_formulas(vp):
    vbar = FourierSeries.from_dict(cos={2: 0.3, 1: 0.1}, sin={3: -0.2}, a0=0.05)
    chk = henry_formula_check(_quad_f, _quad_grad, vbar, volume_preserving=vp)
    assert chk.volume_error < 1e-3
    assert chk.boundary_error < 1e-3


def test_henry_x1_squared_cos2():
    f = lambda P: P[..., 0] ** 2
    grad = lambda P: np.stack([2 * P[..., 0], np.zeros(P.shape[:-1])], axis=-1)
    chk = henry_formula_check(f, grad, FourierSeries.from_dict(cos={2: 1.0}))
    assert chk.volume_error < 1e-3 and chk.boundary_error < 1e-3


def test_henry_constant_function_is_area_and_length():
    vbar = FourierSeries.from_dict(cos={2: 0.3})
    one = lambda P: np.ones(P.shape[:-1])
    zero = lambda P: np.zeros(P.shape)
    chk = henry_formula_check(one, zero, vbar, volume_preserving=True)
    # area is constant along the family
    assert abs(chk.volume_fd) < 1e-9 and abs(chk.volume_formula) < 1e-9
    chk = henry_formula_check(one, zero, vbar)
    assert chk.volume_error < 1e-9
    assert chk.boundary_error < 1e-6
