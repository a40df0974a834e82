"""
Operators at a glance
=====================

A tour of the linear building blocks: the Joseph projector and its
transpose, filtered back-projection, and the two sparsifying transforms.
Everything runs in a couple of seconds.
"""

# %%
# A disk, its sinogram and the FBP inversion
# ------------------------------------------
import numpy as np

from dynct.core import dot_test, power_iteration_lambda_max
from dynct.projector import Geometry, fbp_reconstruct, radon_forward, radon_map, uniform_angles
from dynct.transforms import build_shearlet_system, haar_forward, shearlet_forward, shearlet_map

n = 64
yy, xx = np.mgrid[0:n, 0:n] - (n - 1) / 2
disk = (np.hypot(yy, xx) <= 20).astype(float)

for P in (15, 60, 180):
    g = Geometry(n, uniform_angles(P))
    sino = radon_forward(disk, g)
    rec = fbp_reconstruct(sino, g)
    err = np.linalg.norm(rec - disk) / np.linalg.norm(disk)
    print(f"P={P:4d}  sinogram {sino.shape}  FBP relative error {err:.3f}")

# %%
# The back-projector is the exact transpose
# -----------------------------------------
# ``dot_test`` compares <Ax, y> with <x, A^T y> on random pairs.
op = radon_map(Geometry(n, uniform_angles(30)))
print("projector dot test:", dot_test(op)["max_relative_discrepancy"])
print("largest eigenvalue of A^T A:", power_iteration_lambda_max(op))

# %%
# Sparsity under Haar and shearlets
# ---------------------------------
# The shearlet bank is Parseval, so energy is preserved exactly, and a
# flat image leaves every directional band empty.
c = haar_forward(disk)
print("Haar coefficients above 1e-6:", float(np.mean(np.abs(c) > 1e-6)))

system = build_shearlet_system(2, (n, n), 3)
coeffs = shearlet_forward(system, disk)
print("subbands:", system.n_subbands, " energy ratio:", np.sum(coeffs ** 2) / np.sum(disk ** 2))
print("shearlet dot test:", dot_test(shearlet_map(system))["max_relative_discrepancy"])
