"""
Ten percent error on each summary
=================================

With the max-relative-error metric and delta = 0.1 a simulated summary
vector is accepted when every coordinate is within 10% of the observed
value.  The acceptance region is a box, and uniform acceptance inside it is
a uniform error model on each coordinate.
"""

import numpy as np

from abcerr import RejectionConfig, UniformBall, run_rejection
from abcerr.kernels import MaxRelativeMetric
from abcerr.models import PRITCHARD_OBS, pritchard_model, relative_error_box

box = relative_error_box(PRITCHARD_OBS, 0.1)
for name, (lo, hi) in zip("VHN", box):
    print(f"{name}: [{lo:.5g}, {hi:.5g}]")

model = pritchard_model()
kernel = UniformBall(0.1, metric=MaxRelativeMetric(PRITCHARD_OBS), dim=3)
s = run_rejection(model.prior, model.simulator, model.obs, RejectionConfig(kernel, n_target=5000, seed=11))
print(f"acceptance rate {s.acceptance_rate:.4f}")

# every accepted output sits inside the box
inside = np.all([(s.x[:, i] >= lo) & (s.x[:, i] <= hi) for i, (lo, hi) in enumerate(box)], axis=0)
print(f"accepted outputs inside the box: {inside.mean():.3f}")

# a uniform error on [-d, d] has variance d^2 / 3; the Epanechnikov one d^2 / 5
for name, d in zip("VHN", PRITCHARD_OBS):
    half = 0.1 * d
    print(f"{name}: error sd uniform {half / np.sqrt(3):.4g}, epanechnikov {half / np.sqrt(5):.4g}")
