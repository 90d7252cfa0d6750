"""
Default run config.

One-dimensional window (-1, 1) with a Gaussian intensity, the two-atom mark
law ½δ₁ + ½δ₂, three bumps of radius 0.5 centered at 0 and ±0.3 and fields
built from them. The probe configuration drives the generator checks.
"""

DEFAULT_CONFIG = """\
[space]
dimension = 1
lower = -1.0
upper = 1.0
density = gaussian
amplitude = 1.0
center = 0.0
width = 1.0

[tau]
law = mixture
atoms = 1.0 2.0
weights = 0.5 0.5

[marks]
law = uniform-box
lower = 0.0
upper = 1.0
weights = 1.0
offset = 0.5
direction = b0

[bump.b0]
center = 0.0
radius = 0.5

[bump.b1]
center = 0.3
radius = 0.5

[bump.b2]
center = -0.3
radius = 0.5

[field.v0]
bump = b0
direction = 0.8

[field.v1]
bump = b1
direction = 0.6
slope = 0.5

[field.v2]
bump = b2
direction = -0.7
intercept = 1.0

[function.L0]
outer = identity
directions = b0

[function.T1]
outer = tanh
directions = b1 b2
weights = 1.0 0.5

[function.P2]
outer = poly
directions = b0
coefficients = 0.0 1.0 0.5

[function.E3]
outer = exp
directions = b2
weights = 0.3

[job]
command = verify
check = all
n = 200000
seed = 42
primary = L0
secondary = L0
probe_points = 0.0 0.25 -0.3
probe_marks = 2.0 1.0 2.0

[output]
dir = out
"""
