# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled toggle-walk kernels; semantics match ``pure.py`` exactly."""

from libc.math cimport exp

BACKEND = "compiled"


cdef inline double _degree1_delta(long deg_i, bint adding) nogil:
    if adding:
        return (1.0 if deg_i == 0 else 0.0) - (1.0 if deg_i == 1 else 0.0)
    return (1.0 if deg_i == 2 else 0.0) - (1.0 if deg_i == 1 else 0.0)


def mh_phase(long[::1] di, long[::1] dj, double[::1] base_lo,
             unsigned char[::1] state, long[::1] deg,
             double[::1] deg_coefs, unsigned char[:, ::1] deg_masks,
             long[::1] prop_idx, double[::1] u_acc):
    cdef Py_ssize_t p, k, n_props = prop_idx.shape[0]
    cdef Py_ssize_t n_deg = deg_coefs.shape[0]
    cdef long m, i, j
    cdef bint adding
    cdef double dlo, d
    with nogil:
        for p in range(n_props):
            m = prop_idx[p]
            i = di[m]
            j = dj[m]
            adding = state[m] == 0
            dlo = base_lo[m] if adding else -base_lo[m]
            for k in range(n_deg):
                d = 0.0
                if deg_masks[k, i]:
                    d += _degree1_delta(deg[i], adding)
                if deg_masks[k, j]:
                    d += _degree1_delta(deg[j], adding)
                dlo += deg_coefs[k] * d
            if dlo >= 0.0 or u_acc[p] < exp(dlo):
                if adding:
                    state[m] = 1
                    deg[i] += 1
                    deg[j] += 1
                else:
                    state[m] = 0
                    deg[i] -= 1
                    deg[j] -= 1


def anneal_walk(long[::1] di, long[::1] dj, double[:, ::1] delta_static,
                unsigned char[::1] state, long[::1] deg,
                long[::1] deg_term_cols, unsigned char[:, ::1] deg_masks,
                double[::1] stats, double[::1] targets, double[::1] weights,
                double[::1] temps, long[::1] prop_idx, double[::1] u_acc,
                unsigned char[::1] best_state, double[::1] best_stats):
    cdef Py_ssize_t p, k, t, n_props = prop_idx.shape[0]
    cdef Py_ssize_t q = stats.shape[0]
    cdef Py_ssize_t n_deg = deg_term_cols.shape[0]
    cdef Py_ssize_t mlen = state.shape[0]
    cdef long m, i, j, col
    cdef bint adding
    cdef double sign, d, de, r, energy, best_e
    cdef double[64] dvec_buf
    if q > 64:
        raise ValueError("anneal_walk supports at most 64 targets")
    energy = 0.0
    for t in range(q):
        r = stats[t] - targets[t]
        energy += weights[t] * r * r
    best_e = energy
    best_state[:] = state
    best_stats[:] = stats
    with nogil:
        for p in range(n_props):
            m = prop_idx[p]
            i = di[m]
            j = dj[m]
            adding = state[m] == 0
            sign = 1.0 if adding else -1.0
            for t in range(q):
                dvec_buf[t] = sign * delta_static[m, t]
            for k in range(n_deg):
                col = deg_term_cols[k]
                d = 0.0
                if deg_masks[k, i]:
                    d += _degree1_delta(deg[i], adding)
                if deg_masks[k, j]:
                    d += _degree1_delta(deg[j], adding)
                dvec_buf[col] += d
            de = 0.0
            for t in range(q):
                r = stats[t] - targets[t]
                de += weights[t] * (2.0 * r * dvec_buf[t] + dvec_buf[t] * dvec_buf[t])
            if de <= 0.0 or u_acc[p] < exp(-de / temps[p]):
                if adding:
                    state[m] = 1
                    deg[i] += 1
                    deg[j] += 1
                else:
                    state[m] = 0
                    deg[i] -= 1
                    deg[j] -= 1
                for t in range(q):
                    stats[t] += dvec_buf[t]
                energy += de
                if energy < best_e:
                    best_e = energy
                    for t in range(mlen):
                        best_state[t] = state[t]
                    for t in range(q):
                        best_stats[t] = stats[t]
    return best_e
