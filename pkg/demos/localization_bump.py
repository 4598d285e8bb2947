"""
Where small extremal domains sit
================================

On a round sphere with a smooth bump, the scalar curvature has a single
maximum.  Critical points of Phi(., eps) = R + eps^2 r drift from it by
O(eps^2).
"""

import numpy as np

from extremal_locus import models
from extremal_locus.localization import find_critical_points, metric_distance

spec = models.perturbed_sphere()
region = [(0.2, 1.8), (-0.8, 0.8)]

(p0,) = find_critical_points(spec, 0.1, order=0, region=region, grid=9).points
print("maximum of R at", p0.point, "value", p0.value)

eps = np.array([0.2, 0.1, 0.05])
dist = []
for e in eps:
    (cp,) = find_critical_points(spec, e, region=region, grid=9).points
    dist.append(metric_distance(spec, p0.point, cp.point))
    print(f"eps={e:<5} critical point {cp.point}  ({cp.kind})")

print("log-log slope:", np.polyfit(np.log(eps), np.log(dist), 1)[0])
