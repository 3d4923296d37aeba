"""Pure-numpy batch kernels (fallback backend).

Vectorized across replicas with a Python loop over substeps; the compiled
backend in ``_core.pyx`` implements the identical recurrences with scalar
loops.  All randomness is drawn by the caller and passed in, so both
backends consume exactly the same stream draws.
"""

import numpy as np

BACKEND = "python"


def second_order_exponential_batch(x0, p0, bvals, lin_a, height, lam,
                                   eps, h, n_steps, n_sub,
                                   decay, mean_x, Z, labels):
    """Scalar (d = m = 1) frozen-coefficient exact OU updates, batched.

    Z has shape (R, n_steps * n_sub, 3): per substep, the lower factor of
    the joint (dw, xi_X, xi_p) covariance has already been applied, so the
    three columns are the w-increment and the exact OU displacements of X
    and p.  ``decay`` is exp(-lam h / eps^2) and ``mean_x`` is
    (eps^2 / lam)(1 - decay).  Returns node paths (X, P, W).
    """
    R = Z.shape[0]
    X = np.empty((R, n_steps + 1))
    P = np.empty((R, n_steps + 1))
    W = np.zeros((R, n_steps + 1))
    x = np.full(R, float(x0))
    p = np.full(R, float(p0))
    w = np.zeros(R)
    X[:, 0] = x
    P[:, 0] = p
    one_m_decay = 1.0 - decay
    idx = 0
    for k in range(n_steps):
        for _ in range(n_sub):
            if labels is None:
                b = bvals[0]
            else:
                b = bvals[labels[:, idx]]
            if lin_a != 0.0:
                b = b + lin_a * x
            if height != 0.0:
                b = b - 4.0 * height * (x * x - 1.0) * x
            g = b / lam
            w = w + Z[:, idx, 0]
            x_new = x + p * mean_x + g * (h - mean_x) + Z[:, idx, 1]
            p = p * decay + g * one_m_decay + Z[:, idx, 2]
            x = x_new
            idx += 1
        X[:, k + 1] = x
        P[:, k + 1] = p
        W[:, k + 1] = w
    return X, P, W


def second_order_euler_batch(x0, p0, bvals, lin_a, height, lam,
                             eps, h, n_steps, n_sub, noise_amp, Z, labels):
    """Scalar substepped Euler-Maruyama, batched.

    Z has shape (R, n_steps * n_sub) of standard normals; ``noise_amp`` is
    sqrt(h) sqrt(eps) sigma / eps^2.  Returns node paths (X, P, W) with W
    accumulating the substep increments sqrt(h) Z.
    """
    R = Z.shape[0]
    X = np.empty((R, n_steps + 1))
    P = np.empty((R, n_steps + 1))
    W = np.zeros((R, n_steps + 1))
    x = np.full(R, float(x0))
    p = np.full(R, float(p0))
    w = np.zeros(R)
    X[:, 0] = x
    P[:, 0] = p
    h_over_eps2 = h / eps ** 2
    sq_h = np.sqrt(h)
    idx = 0
    for k in range(n_steps):
        for _ in range(n_sub):
            if labels is None:
                b = bvals[0]
            else:
                b = bvals[labels[:, idx]]
            if lin_a != 0.0:
                b = b + lin_a * x
            if height != 0.0:
                b = b - 4.0 * height * (x * x - 1.0) * x
            z = Z[:, idx]
            w = w + sq_h * z
            x_new = x + p * h
            p = p + (b - lam * p) * h_over_eps2 + noise_amp * z
            x = x_new
            idx += 1
        X[:, k + 1] = x
        P[:, k + 1] = p
        W[:, k + 1] = w
    return X, P, W


def overdamped_batch(q0, bvals, lin_a, height, lam, noise_coef,
                     dt, n_steps, dW, labels):
    """Scalar overdamped Euler-Maruyama, batched over replicas.

    dW holds the node-level w-increments (shared-noise runs pass the
    increments recorded by a second-order simulation).  ``noise_coef`` is
    sqrt(eps) * sigma / lam.  Returns node paths (R, n_steps + 1).
    """
    R = dW.shape[0]
    Q = np.empty((R, n_steps + 1))
    q = np.full(R, float(q0))
    Q[:, 0] = q
    for k in range(n_steps):
        if labels is None:
            b = bvals[0]
        else:
            b = bvals[labels[:, k]]
        if lin_a != 0.0:
            b = b + lin_a * q
        if height != 0.0:
            b = b - 4.0 * height * (q * q - 1.0) * q
        q = q + (b / lam) * dt + noise_coef * dW[:, k]
        Q[:, k + 1] = q
    return Q
