# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled recurrence kernels; same contract as vdparse.kernels.pyref.

The whole time loop runs in C, which removes the per-step Python dispatch
overhead that dominates the numpy backend at small and medium hidden sizes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

BACKEND = "cython"


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


cdef void _matvec(const double[:, ::1] A, const double* x, double* out, Py_ssize_t m, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += A[i, j] * x[j]
        out[i] = acc


cdef void _matvec_t(const double[:, ::1] A, const double* x, double* out, Py_ssize_t m, Py_ssize_t n) noexcept nogil:
    # out (n,) = A.T @ x for A (m, n)
    cdef Py_ssize_t i, j
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        for j in range(n):
            out[j] += A[i, j] * x[i]


def lstm_forward(double[:, ::1] xp, double[::1] h0, double[::1] c0, double[:, ::1] U):
    cdef Py_ssize_t T = xp.shape[0]
    cdef Py_ssize_t G = xp.shape[1]
    cdef Py_ssize_t H = G // 4
    h_seq_arr = np.empty((T, H))
    c_seq_arr = np.empty((T, H))
    gates_arr = np.empty((T, G))
    tanh_c_arr = np.empty((T, H))
    a_arr = np.empty(G)
    cdef double[:, ::1] h_seq = h_seq_arr
    cdef double[:, ::1] c_seq = c_seq_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] tanh_c = tanh_c_arr
    cdef double[::1] a = a_arr
    cdef Py_ssize_t t, k
    cdef double i_g, f_g, g_g, o_g, c_new, tc
    cdef const double* h_prev
    cdef const double* c_prev
    with nogil:
        for t in range(T):
            if t == 0:
                h_prev = &h0[0]
                c_prev = &c0[0]
            else:
                h_prev = &h_seq[t - 1, 0]
                c_prev = &c_seq[t - 1, 0]
            _matvec(U, h_prev, &a[0], G, H)
            for k in range(G):
                a[k] += xp[t, k]
            for k in range(H):
                i_g = _sig(a[k])
                f_g = _sig(a[H + k])
                g_g = tanh(a[2 * H + k])
                o_g = _sig(a[3 * H + k])
                c_new = f_g * c_prev[k] + i_g * g_g
                tc = tanh(c_new)
                gates[t, k] = i_g
                gates[t, H + k] = f_g
                gates[t, 2 * H + k] = g_g
                gates[t, 3 * H + k] = o_g
                c_seq[t, k] = c_new
                tanh_c[t, k] = tc
                h_seq[t, k] = o_g * tc
    return h_seq_arr, c_seq_arr, gates_arr, tanh_c_arr


def lstm_backward(double[:, ::1] dh_out, double[::1] dc_last, double[:, ::1] U,
                  double[::1] h0, double[::1] c0,
                  double[:, ::1] h_seq, double[:, ::1] c_seq,
                  double[:, ::1] gates, double[:, ::1] tanh_c):
    cdef Py_ssize_t T = dh_out.shape[0]
    cdef Py_ssize_t H = dh_out.shape[1]
    cdef Py_ssize_t G = 4 * H
    dxp_arr = np.empty((T, G))
    dU_arr = np.zeros((G, H))
    dh_arr = np.zeros(H)
    dc_arr = np.asarray(dc_last).copy()
    cdef double[:, ::1] dxp = dxp_arr
    cdef double[:, ::1] dU = dU_arr
    cdef double[::1] dh = dh_arr
    cdef double[::1] dc = dc_arr
    cdef Py_ssize_t t, k, j
    cdef double i_g, f_g, g_g, o_g, tc, dh_t, do, di, df, dg, da_k
    cdef const double* h_prev
    cdef const double* c_prev
    with nogil:
        for t in range(T - 1, -1, -1):
            if t == 0:
                h_prev = &h0[0]
                c_prev = &c0[0]
            else:
                h_prev = &h_seq[t - 1, 0]
                c_prev = &c_seq[t - 1, 0]
            for k in range(H):
                i_g = gates[t, k]
                f_g = gates[t, H + k]
                g_g = gates[t, 2 * H + k]
                o_g = gates[t, 3 * H + k]
                tc = tanh_c[t, k]
                dh_t = dh_out[t, k] + dh[k]
                do = dh_t * tc
                dc[k] = dc[k] + dh_t * o_g * (1.0 - tc * tc)
                di = dc[k] * g_g
                df = dc[k] * c_prev[k]
                dg = dc[k] * i_g
                dxp[t, k] = di * i_g * (1.0 - i_g)
                dxp[t, H + k] = df * f_g * (1.0 - f_g)
                dxp[t, 2 * H + k] = dg * (1.0 - g_g * g_g)
                dxp[t, 3 * H + k] = do * o_g * (1.0 - o_g)
                dc[k] = dc[k] * f_g
            for k in range(G):
                da_k = dxp[t, k]
                for j in range(H):
                    dU[k, j] += da_k * h_prev[j]
            _matvec_t(U, &dxp[t, 0], &dh[0], G, H)
    return dxp_arr, dU_arr, dh_arr, dc_arr


def gru_forward(double[:, ::1] xp, double[::1] h0, double[:, ::1] U):
    cdef Py_ssize_t T = xp.shape[0]
    cdef Py_ssize_t G = xp.shape[1]
    cdef Py_ssize_t H = G // 3
    h_seq_arr = np.empty((T, H))
    gates_arr = np.empty((T, G))
    uh_n_arr = np.empty((T, H))
    uh_arr = np.empty(G)
    cdef double[:, ::1] h_seq = h_seq_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[:, ::1] uh_n = uh_n_arr
    cdef double[::1] uh = uh_arr
    cdef Py_ssize_t t, k
    cdef double z_g, r_g, n_g
    cdef const double* h_prev
    with nogil:
        for t in range(T):
            if t == 0:
                h_prev = &h0[0]
            else:
                h_prev = &h_seq[t - 1, 0]
            _matvec(U, h_prev, &uh[0], G, H)
            for k in range(H):
                z_g = _sig(xp[t, k] + uh[k])
                r_g = _sig(xp[t, H + k] + uh[H + k])
                n_g = tanh(xp[t, 2 * H + k] + r_g * uh[2 * H + k])
                gates[t, k] = z_g
                gates[t, H + k] = r_g
                gates[t, 2 * H + k] = n_g
                uh_n[t, k] = uh[2 * H + k]
                h_seq[t, k] = z_g * h_prev[k] + (1.0 - z_g) * n_g
    return h_seq_arr, gates_arr, uh_n_arr


def gru_backward(double[:, ::1] dh_out, double[:, ::1] U, double[::1] h0,
                 double[:, ::1] h_seq, double[:, ::1] gates, double[:, ::1] uh_n):
    cdef Py_ssize_t T = dh_out.shape[0]
    cdef Py_ssize_t H = dh_out.shape[1]
    cdef Py_ssize_t G = 3 * H
    dxp_arr = np.empty((T, G))
    dU_arr = np.zeros((G, H))
    dh_arr = np.zeros(H)
    duh_arr = np.empty(G)
    dh_new_arr = np.empty(H)
    cdef double[:, ::1] dxp = dxp_arr
    cdef double[:, ::1] dU = dU_arr
    cdef double[::1] dh = dh_arr
    cdef double[::1] duh = duh_arr
    cdef double[::1] dh_new = dh_new_arr
    cdef Py_ssize_t t, k, j
    cdef double z_g, r_g, n_g, dh_t, dz, dn, dan, dr, duh_k
    cdef const double* h_prev
    with nogil:
        for t in range(T - 1, -1, -1):
            if t == 0:
                h_prev = &h0[0]
            else:
                h_prev = &h_seq[t - 1, 0]
            for k in range(H):
                z_g = gates[t, k]
                r_g = gates[t, H + k]
                n_g = gates[t, 2 * H + k]
                dh_t = dh_out[t, k] + dh[k]
                dz = dh_t * (h_prev[k] - n_g)
                dn = dh_t * (1.0 - z_g)
                dan = dn * (1.0 - n_g * n_g)
                dr = dan * uh_n[t, k]
                dxp[t, k] = dz * z_g * (1.0 - z_g)
                dxp[t, H + k] = dr * r_g * (1.0 - r_g)
                dxp[t, 2 * H + k] = dan
                duh[k] = dxp[t, k]
                duh[H + k] = dxp[t, H + k]
                duh[2 * H + k] = dan * r_g
                dh_new[k] = dh_t * z_g
            for k in range(G):
                duh_k = duh[k]
                for j in range(H):
                    dU[k, j] += duh_k * h_prev[j]
            _matvec_t(U, &duh[0], &dh[0], G, H)
            for k in range(H):
                dh[k] += dh_new[k]
    return dxp_arr, dU_arr, dh_arr
