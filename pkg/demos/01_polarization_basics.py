"""Stokes vectors, Mueller elements, and polarimetric features
================================================================

A walk through the algebra layer: building ideal optical elements,
pushing Stokes vectors through them, and reading off the standard
polarization descriptors.
"""

import numpy as np

import polarcube as pc

# A Stokes vector is just a length-4 array: total intensity s0, the two
# linear difference components s1 (0/90 deg) and s2 (+-45 deg), and the
# circular difference s3.
unpolarized = np.array([1.0, 0.0, 0.0, 0.0])
horizontal = np.array([1.0, 1.0, 0.0, 0.0])
right_circular = np.array([1.0, 0.0, 0.0, 1.0])

# An ideal linear polarizer passes half of unpolarized light and imprints
# its own orientation:
lp = pc.lp_mueller(0.0)
print("unpolarized through horizontal LP:", pc.apply(lp, unpolarized))

# A quarter-wave plate at 45 degrees turns horizontal light circular:
qwp = pc.retarder_mueller(np.pi / 4, np.pi / 2)
print("horizontal through QWP(45 deg):  ", pc.apply(qwp, horizontal))

# Ideal polarizers are projectors (applying one twice changes nothing),
# and four quarter waves on the same axis make a full wave:
print("LP idempotence error:", np.abs(lp @ lp - lp).max())
q = pc.retarder_mueller(0.3, np.pi / 2)
print("QWP^4 vs identity:   ", np.abs(q @ q @ q @ q - np.eye(4)).max())

# Rotating an element in its mount is a similarity transform with the
# frame rotation matrix; the constructors agree with it:
print(
    "rotate(LP(0), 30 deg) vs LP(30 deg):",
    np.abs(pc.rotate_mueller(pc.lp_mueller(0.0), np.pi / 6) - pc.lp_mueller(np.pi / 6)).max(),
)

# The feature set: degree of polarization rho, its linear/circular split,
# the linear orientation psi, ellipticity chi, and handedness.
mixed = np.array([2.0, 1.0, 1.0, np.sqrt(2.0)])
f = pc.features(mixed)
print(f"\nfeatures of {mixed}:")
print(f"  rho  = {f.rho:.6f}   (fully polarized)")
print(f"  dolp = {f.dolp:.6f}, docp = {f.docp:.6f}  (rho^2 = dolp^2 + docp^2)")
print(f"  psi  = {f.psi:.6f} rad = pi/8")
print(f"  chi  = {f.chi:.6f} rad, handedness {f.cop:+.0f}")

# Polarized/unpolarized intensity split: P = |(s1, s2, s3)|, U = s0 - P.
pol, unpol = pc.decompose(mixed)
print(f"\npolarized intensity {pol:.6f} + unpolarized {unpol:.6f} = s0 = {mixed[0]}")

# Physical validity is the degree-of-polarization bound rho <= 1:
print("\nvalidity of [1, .6, .8, 0]:", bool(pc.is_valid([1, 0.6, 0.8, 0])))
print("validity of [1, .8, .8, 0]:", bool(pc.is_valid([1, 0.8, 0.8, 0])))

# Normalized Stokes components place every state inside the unit ball
# (the Poincare sphere); the radius equals rho.
point = pc.normalize(mixed)
print("\nPoincare point:", point, "radius:", np.linalg.norm(point))
