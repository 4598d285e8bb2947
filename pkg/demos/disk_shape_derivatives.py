"""
Shape derivatives of the first eigenvalue of the disk
=====================================================

Area-preserving perturbations r = 1 + v0(t) + t cos(k theta) of the unit
disk leave lambda stationary at t = 0; the second derivative is fixed by the
eigenvalue alpha_k of H.
"""

from extremal_locus.shape_lab import FourierSeries, first_derivative_check, second_derivative_check

chk = first_derivative_check(FourierSeries.from_dict(cos={3: 1.0}))
print("first derivative, area preserving:", chk.finite_difference)

for k in (1, 2, 3):
    chk = second_derivative_check(k)
    print(f"k={k}: finite differences {chk.finite_difference:.8f}, predicted {chk.predicted:.8f}")
