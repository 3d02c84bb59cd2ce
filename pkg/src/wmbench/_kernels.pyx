# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror ``wmbench._kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, floor, round as cround, M_PI

cnp.import_array()


def envelope_follower(const double[::1] x_abs, double attack, double release):
    cdef Py_ssize_t n = x_abs.shape[0]
    cdef Py_ssize_t i
    cdef double env = 0.0
    cdef double a, v
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            v = x_abs[i]
            a = attack if v > env else release
            env = a * env + (1.0 - a) * v
            o[i] = env
    return out


def sos_filter(const double[:, ::1] sos, const double[::1] x):
    cdef Py_ssize_t n_sec = sos.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t s, i
    cdef double b0, b1, b2, a1, a2, z0, z1, xi, yi
    out = np.array(x, dtype=np.float64, copy=True)
    cdef double[::1] y = out
    with nogil:
        for s in range(n_sec):
            b0 = sos[s, 0] / sos[s, 3]
            b1 = sos[s, 1] / sos[s, 3]
            b2 = sos[s, 2] / sos[s, 3]
            a1 = sos[s, 4] / sos[s, 3]
            a2 = sos[s, 5] / sos[s, 3]
            z0 = 0.0
            z1 = 0.0
            for i in range(n):
                xi = y[i]
                yi = b0 * xi + z0
                z0 = b1 * xi - a1 * yi + z1
                z1 = b2 * xi - a2 * yi
                y[i] = yi
    return out


def sinc_resample(const double[::1] x, double step, Py_ssize_t n_out,
                  double cutoff, Py_ssize_t half_width):
    cdef Py_ssize_t n_in = x.shape[0]
    cdef Py_ssize_t n, k, k0, k_lo, k_hi
    cdef double p, t, acc, arg, w
    out = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for n in range(n_out):
            p = n * step
            k0 = <Py_ssize_t>floor(p)
            k_lo = k0 - half_width + 1
            k_hi = k0 + half_width
            if k_lo < 0:
                k_lo = 0
            if k_hi > n_in - 1:
                k_hi = n_in - 1
            acc = 0.0
            for k in range(k_lo, k_hi + 1):
                t = p - k
                if t <= -half_width or t >= half_width:
                    continue
                w = 0.5 * (1.0 + cos(M_PI * t / half_width))
                arg = M_PI * cutoff * t
                if arg == 0.0:
                    acc += x[k] * cutoff * w
                else:
                    acc += x[k] * cutoff * (sin(arg) / arg) * w
            y[n] = acc
    return out


def phase_vocoder(const double[:, ::1] mag, const double[:, ::1] phase,
                  const double[::1] time_steps, const double[::1] advance):
    cdef Py_ssize_t n_frames = mag.shape[0]
    cdef Py_ssize_t n_bins = mag.shape[1]
    cdef Py_ssize_t n_out = time_steps.shape[0]
    cdef Py_ssize_t t, k, i0, i1
    cdef double step, alpha, m, d
    cdef double two_pi = 2.0 * M_PI
    out_re = np.empty((n_out, n_bins), dtype=np.float64)
    out_im = np.empty((n_out, n_bins), dtype=np.float64)
    acc_arr = np.array(phase[0], dtype=np.float64, copy=True)
    cdef double[:, ::1] ore = out_re
    cdef double[:, ::1] oim = out_im
    cdef double[::1] acc = acc_arr
    with nogil:
        for t in range(n_out):
            step = time_steps[t]
            i0 = <Py_ssize_t>floor(step)
            if i0 > n_frames - 2:
                i0 = n_frames - 2
            i1 = i0 + 1
            alpha = step - i0
            if alpha > 1.0:
                alpha = 1.0
            for k in range(n_bins):
                m = (1.0 - alpha) * mag[i0, k] + alpha * mag[i1, k]
                ore[t, k] = m * cos(acc[k])
                oim[t, k] = m * sin(acc[k])
                d = phase[i1, k] - phase[i0, k] - advance[k]
                d = d - two_pi * cround(d / two_pi)
                acc[k] = acc[k] + advance[k] + d
    return out_re + 1j * out_im
