"""
Small geodesic balls in space forms
===================================

On a space form the geodesic ball is rotationally symmetric, so its volume
and first eigenvalue come from one-dimensional problems.  Fitting the
rescaled quantities in powers of eps recovers the expansion coefficients.
"""

import math

from extremal_locus.spaceform import spaceform_ball_eigenvalue, verify_eigenvalue_expansion, verify_volume_expansion

# in three dimensions the eigenvalue is known exactly: pi^2/eps^2 - kappa
eps = 0.3
print(spaceform_ball_eigenvalue(3, 1.0, eps), math.pi**2 / eps**2 - 1)

# %%
# Volume: both fitted coefficients agree with the closed forms.
vol = verify_volume_expansion(2, 1.0)
print("W0, W fitted:", vol.coefficients, "predicted:", vol.predicted)

# %%
# Eigenvalue: the eps^2 coefficient is -R/6.  The eps^4 comparison is
# reported together with any flag raised by the check.
ev = verify_eigenvalue_expansion(2, 1.0)
print("Lambda0 fitted:", ev.coefficient(2), "predicted:", ev.predicted["Lambda0"])
print("Lambda fitted:", ev.coefficient(4), "predicted:", ev.predicted["Lambda"])
for flag in ev.flags:
    print("flag:", flag)
