# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of ``_chain_py.run_chain_kernel``.

Same inputs, same sampling rule, same update; plain C loops over small dense
complex matrices instead of per-step numpy dispatch.
"""

from libc.math cimport log

import numpy as np

BACKEND_NAME = "cython"


def run_chain_kernel(
    double complex[:, :, ::1] kraus,
    long long[::1] offsets,
    double complex[:, :, ::1] effects,
    double complex[:, ::1] rho0,
    double[::1] uniforms,
    long long[::1] outcomes_out,
    double[::1] probs_out,
    double complex[:, :, ::1] states_out,
):
    cdef Py_ssize_t n = uniforms.shape[0]
    cdef Py_ssize_t d = rho0.shape[0]
    cdef Py_ssize_t n_out = effects.shape[0]
    cdef Py_ssize_t step, x, k, i, j, l, chosen
    cdef double u, cum, p, tr
    cdef double logprob = 0.0
    cdef double complex acc

    rho_arr = np.array(rho0, dtype=complex)
    tmp_arr = np.zeros((d, d), dtype=complex)
    tnew_arr = np.zeros((d, d), dtype=complex)
    probs_arr = np.zeros(n_out)
    cdef double complex[:, ::1] rho = rho_arr
    cdef double complex[:, ::1] tmp = tmp_arr
    cdef double complex[:, ::1] tnew = tnew_arr
    cdef double[::1] probs = probs_arr

    for step in range(n):
        u = uniforms[step]
        for x in range(n_out):
            acc = 0
            for i in range(d):
                for j in range(d):
                    acc = acc + rho[i, j] * effects[x, j, i]
            p = acc.real
            probs[x] = p if p > 0.0 else 0.0
        cum = 0.0
        chosen = -1
        for x in range(n_out):
            p = probs[x]
            if p <= 0.0:
                continue
            cum += p
            if u < cum:
                chosen = x
                break
        if chosen == -1:
            for x in range(n_out - 1, -1, -1):
                if probs[x] > 0.0:
                    chosen = x
                    break
        for i in range(d):
            for j in range(d):
                tnew[i, j] = 0
        for k in range(offsets[chosen], offsets[chosen + 1]):
            for i in range(d):
                for j in range(d):
                    acc = 0
                    for l in range(d):
                        acc = acc + kraus[k, i, l] * rho[l, j]
                    tmp[i, j] = acc
            for i in range(d):
                for j in range(d):
                    acc = 0
                    for l in range(d):
                        acc = acc + tmp[i, l] * kraus[k, j, l].conjugate()
                    tnew[i, j] = tnew[i, j] + acc
        tr = 0.0
        for i in range(d):
            tr += tnew[i, i].real
        for i in range(d):
            for j in range(d):
                rho[i, j] = tnew[i, j] / tr
                states_out[step, i, j] = rho[i, j]
        outcomes_out[step] = chosen
        probs_out[step] = probs[chosen]
        logprob += log(probs[chosen])
    return logprob
