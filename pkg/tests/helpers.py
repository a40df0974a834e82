"""Independent reference implementations shared by the test modules."""

import math

import numpy as np


def dense_joseph(n, angles, detectors, spacing=1.0):
    """Joseph projector assembled ray by ray with plain Python loops."""
    centre = (n - 1) / 2.0
    mat = np.zeros((len(angles) * detectors, n * n))
    for a, theta in enumerate(angles):
        c, s = math.cos(theta), math.sin(theta)
        for d in range(detectors):
            r = (d - (detectors - 1) / 2.0) * spacing
            row = a * detectors + d
            if abs(s) >= abs(c):
                for j in range(n):
                    x1 = j - centre
                    pos = (r - x1 * c) / s + centre
                    i0 = math.floor(pos)
                    w1 = pos - i0
                    for i, w in ((i0, 1.0 - w1), (i0 + 1, w1)):
                        if 0 <= i < n and w > 0:
                            mat[row, i * n + j] += w / abs(s)
            else:
                for i in range(n):
                    x2 = i - centre
                    pos = (r - x2 * s) / c + centre
                    j0 = math.floor(pos)
                    w1 = pos - j0
                    for j, w in ((j0, 1.0 - w1), (j0 + 1, w1)):
                        if 0 <= j < n and w > 0:
                            mat[row, i * n + j] += w / abs(c)
    return mat


def disk(n, radius, value=1.0, centre=None):
    c = (n - 1) / 2.0 if centre is None else centre
    yy, xx = np.mgrid[0:n, 0:n]
    return np.where(np.hypot(yy - c, xx - c) <= radius, value, 0.0)


def projected_pdhg(A, W, y, alpha, iters=100_000):
    """Reference minimizer of 0.5||Af - y||^2 + alpha ||W f||_1 subject to f >= 0.

    Chambolle-Pock on K = [A; W] with F(z1, z2) = 0.5||z1 - y||^2 + alpha||z2||_1
    and G = indicator of the nonnegative orthant, so every prox is closed form.
    """
    K = np.vstack([A, W])
    L = np.linalg.norm(K, 2)
    tau = sigma = 0.99 / L
    m = A.shape[0]
    f = np.zeros(A.shape[1])
    fbar = f.copy()
    z = np.zeros(K.shape[0])
    for _ in range(iters):
        z = z + sigma * (K @ fbar)
        z1 = (z[:m] - sigma * y) / (1.0 + sigma)
        z2 = np.clip(z[m:], -alpha, alpha)
        z = np.concatenate([z1, z2])
        f_new = np.maximum(f - tau * (K.T @ z), 0.0)
        fbar = 2 * f_new - f
        f = f_new
    return f


def objective(A, W, y, alpha, f):
    return 0.5 * float(np.sum((A @ f - y) ** 2)) + alpha * float(np.abs(W @ f).sum())
