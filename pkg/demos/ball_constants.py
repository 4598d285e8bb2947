"""
Unit-ball constants and the spectrum of H
=========================================

The first Dirichlet eigenfunction of the unit ball fixes every constant used
downstream: lambda1, its Neumann value c1 and the weighted moment c^2.  The
operator H acts on spherical-harmonic degree j by the scalar alpha_j.
"""

import numpy as np

from extremal_locus.ball_spectrum import ball_constants
from extremal_locus.h_operator import h_eigenvalue, h_eigenvalue_closed

for n in range(2, 7):
    k = ball_constants(n)
    print(f"n={n}  lambda1={k.lambda1:.12f}  c1={k.c1:.10f}  c^2={k.c_sq:.10f}")

# %%
# alpha_1 vanishes (translations), alpha_2 has a closed form and the
# sequence increases with j.
n = 3
alphas = np.array([h_eigenvalue(n, j) for j in range(1, 8)])
print("alpha_j, n=3:", np.round(alphas, 8))
print("alpha_2 closed form:", h_eigenvalue_closed(n, 2))
