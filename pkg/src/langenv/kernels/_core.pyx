# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled batch kernels: same recurrences as ``_ref``, scalar C loops."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def second_order_exponential_batch(double x0, double p0,
                                   double[::1] bvals, double lin_a,
                                   double height, double lam,
                                   double eps, double h,
                                   Py_ssize_t n_steps, Py_ssize_t n_sub,
                                   double decay, double mean_x,
                                   double[:, :, ::1] Z, labels):
    cdef Py_ssize_t R = Z.shape[0]
    cdef cnp.ndarray X_arr = np.empty((R, n_steps + 1))
    cdef cnp.ndarray P_arr = np.empty((R, n_steps + 1))
    cdef cnp.ndarray W_arr = np.zeros((R, n_steps + 1))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] P = P_arr
    cdef double[:, ::1] W = W_arr
    cdef long[:, ::1] lab
    cdef bint has_labels = labels is not None
    if has_labels:
        lab = labels
    cdef double one_m_decay = 1.0 - decay
    cdef double x, p, w, b, g, x_new
    cdef Py_ssize_t r, k, j, idx
    for r in range(R):
        x = x0
        p = p0
        w = 0.0
        X[r, 0] = x
        P[r, 0] = p
        W[r, 0] = 0.0
        idx = 0
        for k in range(n_steps):
            for j in range(n_sub):
                if has_labels:
                    b = bvals[lab[r, idx]]
                else:
                    b = bvals[0]
                if lin_a != 0.0:
                    b = b + lin_a * x
                if height != 0.0:
                    b = b - 4.0 * height * (x * x - 1.0) * x
                g = b / lam
                w = w + Z[r, idx, 0]
                x_new = x + p * mean_x + g * (h - mean_x) + Z[r, idx, 1]
                p = p * decay + g * one_m_decay + Z[r, idx, 2]
                x = x_new
                idx += 1
            X[r, k + 1] = x
            P[r, k + 1] = p
            W[r, k + 1] = w
    return X_arr, P_arr, W_arr


def second_order_euler_batch(double x0, double p0, double[::1] bvals,
                             double lin_a, double height, double lam,
                             double eps, double h,
                             Py_ssize_t n_steps, Py_ssize_t n_sub,
                             double noise_amp, double[:, ::1] Z, labels):
    cdef Py_ssize_t R = Z.shape[0]
    cdef cnp.ndarray X_arr = np.empty((R, n_steps + 1))
    cdef cnp.ndarray P_arr = np.empty((R, n_steps + 1))
    cdef cnp.ndarray W_arr = np.zeros((R, n_steps + 1))
    cdef double[:, ::1] X = X_arr
    cdef double[:, ::1] P = P_arr
    cdef double[:, ::1] W = W_arr
    cdef long[:, ::1] lab
    cdef bint has_labels = labels is not None
    if has_labels:
        lab = labels
    cdef double h_over_eps2 = h / (eps * eps)
    cdef double sq_h = np.sqrt(h)
    cdef double x, p, w, b, z, x_new
    cdef Py_ssize_t r, k, j, idx
    for r in range(R):
        x = x0
        p = p0
        w = 0.0
        X[r, 0] = x
        P[r, 0] = p
        W[r, 0] = 0.0
        idx = 0
        for k in range(n_steps):
            for j in range(n_sub):
                if has_labels:
                    b = bvals[lab[r, idx]]
                else:
                    b = bvals[0]
                if lin_a != 0.0:
                    b = b + lin_a * x
                if height != 0.0:
                    b = b - 4.0 * height * (x * x - 1.0) * x
                z = Z[r, idx]
                w = w + sq_h * z
                x_new = x + p * h
                p = p + (b - lam * p) * h_over_eps2 + noise_amp * z
                x = x_new
                idx += 1
            X[r, k + 1] = x
            P[r, k + 1] = p
            W[r, k + 1] = w
    return X_arr, P_arr, W_arr


def overdamped_batch(double q0, double[::1] bvals, double lin_a,
                     double height, double lam, double noise_coef,
                     double dt, Py_ssize_t n_steps,
                     double[:, ::1] dW, labels):
    cdef Py_ssize_t R = dW.shape[0]
    cdef cnp.ndarray Q_arr = np.empty((R, n_steps + 1))
    cdef double[:, ::1] Q = Q_arr
    cdef long[:, ::1] lab
    cdef bint has_labels = labels is not None
    if has_labels:
        lab = labels
    cdef double q, b
    cdef Py_ssize_t r, k
    for r in range(R):
        q = q0
        Q[r, 0] = q
        for k in range(n_steps):
            if has_labels:
                b = bvals[lab[r, k]]
            else:
                b = bvals[0]
            if lin_a != 0.0:
                b = b + lin_a * q
            if height != 0.0:
                b = b - 4.0 * height * (q * q - 1.0) * q
            q = q + (b / lam) * dt + noise_coef * dW[r, k]
            Q[r, k + 1] = q
    return Q_arr
