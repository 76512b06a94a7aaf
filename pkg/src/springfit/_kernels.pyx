# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Bit-identical twin of springfit._kernels_py: same operation order, two-pass
edge scatters matching np.add.at semantics, and no FMA contraction (see
setup.py). Any change here must be mirrored in the NumPy module.
"""

import numpy as np

from libc.math cimport sqrt
from libc.stdint cimport int64_t

BACKEND_NAME = "cython"
DEGENERATE_LENGTH = 1e-9
TANGENT_EPS = 1e-10

cdef double DEG_LEN = 1e-9
cdef double T_EPS = 1e-10


cdef int _forces(double[:, ::1] x, double[:, ::1] v,
                 int64_t[::1] ei, int64_t[::1] ej,
                 double[::1] rest, double[::1] k, double[::1] gamma,
                 double[::1] masses, double[::1] gravity,
                 double[:, ::1] out_f, double[:, ::1] comb) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t m = ei.shape[0]
    cdef Py_ssize_t p, e, i, j
    cdef double dx, dy, dz, length, coef, g
    cdef int ndeg = 0

    for p in range(n):
        out_f[p, 0] = masses[p] * gravity[0]
        out_f[p, 1] = masses[p] * gravity[1]
        out_f[p, 2] = masses[p] * gravity[2]

    for e in range(m):
        i = ei[e]
        j = ej[e]
        dx = x[j, 0] - x[i, 0]
        dy = x[j, 1] - x[i, 1]
        dz = x[j, 2] - x[i, 2]
        length = sqrt(dx * dx + dy * dy + dz * dz)
        if length >= DEG_LEN:
            coef = k[e] * (length - rest[e]) / length
            g = gamma[e]
        else:
            coef = 0.0
            g = 0.0
            ndeg += 1
        comb[e, 0] = coef * dx + g * (v[j, 0] - v[i, 0])
        comb[e, 1] = coef * dy + g * (v[j, 1] - v[i, 1])
        comb[e, 2] = coef * dz + g * (v[j, 2] - v[i, 2])

    # same two-pass order as np.add.at(f, ei, comb); np.add.at(f, ej, -comb)
    for e in range(m):
        i = ei[e]
        out_f[i, 0] += comb[e, 0]
        out_f[i, 1] += comb[e, 1]
        out_f[i, 2] += comb[e, 2]
    for e in range(m):
        j = ej[e]
        out_f[j, 0] += -comb[e, 0]
        out_f[j, 1] += -comb[e, 1]
        out_f[j, 2] += -comb[e, 2]
    return ndeg


def accumulate_forces(double[:, ::1] x, double[:, ::1] v,
                      int64_t[::1] ei, int64_t[::1] ej,
                      double[::1] rest, double[::1] k, double[::1] gamma,
                      double[::1] masses, double[::1] gravity,
                      double[:, ::1] out_f):
    comb = np.empty((ei.shape[0], 3))
    cdef double[:, ::1] comb_v = comb
    return _forces(x, v, ei, ej, rest, k, gamma, masses, gravity, out_f, comb_v)


cdef void _substep(double[:, ::1] x, double[:, ::1] v,
                   double[:, ::1] x_out, double[:, ::1] v_out,
                   double[:, ::1] f,
                   double delta, double dt, double ground,
                   double restitution, double friction,
                   double[::1] masses) noexcept nogil:
    """Integrate one substep given precomputed forces f (collision included,
    ground clamp included; control overrides are applied by the caller)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t p
    cdef double vhx, vhy, vhz, u, wx, wz, st, denom, a, c
    c = friction * (1.0 + restitution)
    for p in range(n):
        vhx = delta * (v[p, 0] + (dt * f[p, 0]) / masses[p])
        vhy = delta * (v[p, 1] + (dt * f[p, 1]) / masses[p])
        vhz = delta * (v[p, 2] + (dt * f[p, 2]) / masses[p])
        if x[p, 1] < ground and vhy < 0.0:
            u = vhy
            wx = vhx
            wz = vhz
            st = sqrt(wx * wx + wz * wz)
            denom = st + T_EPS
            a = 1.0 - c * (-u) / denom
            if a <= 0.0:
                a = 0.0
            v_out[p, 0] = a * wx
            v_out[p, 1] = -restitution * u
            v_out[p, 2] = a * wz
            x_out[p, 0] = x[p, 0] + dt * v_out[p, 0]
            x_out[p, 1] = x[p, 1] + dt * v_out[p, 1]
            x_out[p, 2] = x[p, 2] + dt * v_out[p, 2]
            if x_out[p, 1] < ground:
                x_out[p, 1] = ground
        else:
            v_out[p, 0] = vhx
            v_out[p, 1] = vhy
            v_out[p, 2] = vhz
            x_out[p, 0] = x[p, 0] + dt * vhx
            x_out[p, 1] = x[p, 1] + dt * vhy
            x_out[p, 2] = x[p, 2] + dt * vhz


def frame_forward(double[:, :, ::1] hx, double[:, :, ::1] hv,
                  int64_t[::1] ei, int64_t[::1] ej,
                  double[::1] rest, double[::1] k, double[::1] gamma,
                  double[::1] masses, double[::1] gravity,
                  double delta, double dt, double ground,
                  double restitution, double friction,
                  int64_t[::1] ctrl_idx, double[:, ::1] ctrl_from, double[:, ::1] ctrl_to,
                  int substeps):
    f_arr = np.empty((hx.shape[1], 3))
    comb_arr = np.empty((ei.shape[0], 3))
    cdef double[:, ::1] f = f_arr
    cdef double[:, ::1] comb = comb_arr
    cdef Py_ssize_t s, p, ci
    cdef Py_ssize_t nc = ctrl_idx.shape[0]
    cdef double t, tx, ty, tz
    cdef int ndeg = 0

    with nogil:
        for s in range(substeps):
            ndeg += _forces(hx[s], hv[s], ei, ej, rest, k, gamma, masses, gravity, f, comb)
            _substep(hx[s], hv[s], hx[s + 1], hv[s + 1], f,
                     delta, dt, ground, restitution, friction, masses)
            if nc:
                t = (s + 1.0) / substeps
                for p in range(nc):
                    ci = ctrl_idx[p]
                    tx = ctrl_from[p, 0] + (ctrl_to[p, 0] - ctrl_from[p, 0]) * t
                    ty = ctrl_from[p, 1] + (ctrl_to[p, 1] - ctrl_from[p, 1]) * t
                    tz = ctrl_from[p, 2] + (ctrl_to[p, 2] - ctrl_from[p, 2]) * t
                    hv[s + 1, ci, 0] = (tx - hx[s, ci, 0]) / dt
                    hv[s + 1, ci, 1] = (ty - hx[s, ci, 1]) / dt
                    hv[s + 1, ci, 2] = (tz - hx[s, ci, 2]) / dt
                    hx[s + 1, ci, 0] = tx
                    hx[s + 1, ci, 1] = ty
                    hx[s + 1, ci, 2] = tz
    return ndeg


def frame_backward(double[:, :, ::1] hx, double[:, :, ::1] hv,
                   int64_t[::1] ei, int64_t[::1] ej,
                   double[::1] rest, double[::1] k, double[::1] gamma,
                   double[::1] masses, double[::1] gravity,
                   double delta, double dt, double ground,
                   double restitution, double friction,
                   int64_t[::1] ctrl_idx, double[:, ::1] ctrl_from, double[:, ::1] ctrl_to,
                   int substeps,
                   double[:, ::1] gx, double[:, ::1] gv,
                   double[::1] gk, double[::1] ggamma):
    cdef Py_ssize_t n = hx.shape[1]
    cdef Py_ssize_t m = ei.shape[0]
    f_arr = np.empty((n, 3)); vh_arr = np.empty((n, 3)); vn_arr = np.empty((n, 3))
    gxo_arr = np.empty((n, 3)); gvo_arr = np.empty((n, 3))
    gxp_arr = np.empty((n, 3)); gvp_arr = np.empty((n, 3)); gf_arr = np.empty((n, 3))
    comb_arr = np.empty((m, 3)); gd_arr = np.empty((m, 3)); gvi_arr = np.empty((m, 3))
    contact_arr = np.zeros(n, dtype=np.uint8); clamp_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] f = f_arr, vh = vh_arr, vn = vn_arr
    cdef double[:, ::1] gxo = gxo_arr, gvo = gvo_arr, gxp = gxp_arr, gvp = gvp_arr, gf = gf_arr
    cdef double[:, ::1] comb = comb_arr, gd = gd_arr, gvi = gvi_arr
    cdef unsigned char[::1] contact = contact_arr, clamp = clamp_arr
    cdef double[:, ::1] x, v
    cdef Py_ssize_t s, p, e, i, j, ci
    cdef Py_ssize_t nc = ctrl_idx.shape[0]
    cdef double c, u, wx, wz, st, denom, a_raw, a, gax, gay, gaz, da, da_du, scale
    cdef double dx, dy, dz, length, coef, dvx, dvy, dvz, dot, cbx, cby, cbz, ge

    c = friction * (1.0 + restitution)
    with nogil:
        for s in range(substeps - 1, -1, -1):
            x = hx[s]
            v = hv[s]

            # replay the substep to recover intermediates and branch choices
            _forces(x, v, ei, ej, rest, k, gamma, masses, gravity, f, comb)
            for p in range(n):
                vh[p, 0] = delta * (v[p, 0] + (dt * f[p, 0]) / masses[p])
                vh[p, 1] = delta * (v[p, 1] + (dt * f[p, 1]) / masses[p])
                vh[p, 2] = delta * (v[p, 2] + (dt * f[p, 2]) / masses[p])
                if x[p, 1] < ground and vh[p, 1] < 0.0:
                    contact[p] = 1
                    u = vh[p, 1]
                    wx = vh[p, 0]
                    wz = vh[p, 2]
                    st = sqrt(wx * wx + wz * wz)
                    denom = st + T_EPS
                    a_raw = 1.0 - c * (-u) / denom
                    a = a_raw if a_raw > 0.0 else 0.0
                    vn[p, 0] = a * wx
                    vn[p, 1] = -restitution * u
                    vn[p, 2] = a * wz
                else:
                    contact[p] = 0
                    vn[p, 0] = vh[p, 0]
                    vn[p, 1] = vh[p, 1]
                    vn[p, 2] = vh[p, 2]
                clamp[p] = 1 if (contact[p] and x[p, 1] + dt * vn[p, 1] < ground) else 0

            for p in range(n):
                gxo[p, 0] = gx[p, 0]; gxo[p, 1] = gx[p, 1]; gxo[p, 2] = gx[p, 2]
                gvo[p, 0] = gv[p, 0]; gvo[p, 1] = gv[p, 1]; gvo[p, 2] = gv[p, 2]
                gxp[p, 0] = 0.0; gxp[p, 1] = 0.0; gxp[p, 2] = 0.0
                gvp[p, 0] = 0.0; gvp[p, 1] = 0.0; gvp[p, 2] = 0.0

            # control override: x_out is a constant target, v_out = (target - x)/dt
            for p in range(nc):
                ci = ctrl_idx[p]
                gxp[ci, 0] = gxp[ci, 0] - gvo[ci, 0] / dt
                gxp[ci, 1] = gxp[ci, 1] - gvo[ci, 1] / dt
                gxp[ci, 2] = gxp[ci, 2] - gvo[ci, 2] / dt
                gxo[ci, 0] = 0.0; gxo[ci, 1] = 0.0; gxo[ci, 2] = 0.0
                gvo[ci, 0] = 0.0; gvo[ci, 1] = 0.0; gvo[ci, 2] = 0.0

            for p in range(n):
                if clamp[p]:
                    gxo[p, 1] = 0.0

            # x_new = x + dt * v_new ; collision backward ; vh = delta*(v + dt*f/m)
            for p in range(n):
                gxp[p, 0] = gxp[p, 0] + gxo[p, 0]
                gxp[p, 1] = gxp[p, 1] + gxo[p, 1]
                gxp[p, 2] = gxp[p, 2] + gxo[p, 2]
                gax = gvo[p, 0] + dt * gxo[p, 0]
                gay = gvo[p, 1] + dt * gxo[p, 1]
                gaz = gvo[p, 2] + dt * gxo[p, 2]
                if contact[p]:
                    u = vh[p, 1]
                    wx = vh[p, 0]
                    wz = vh[p, 2]
                    st = sqrt(wx * wx + wz * wz)
                    denom = st + T_EPS
                    a_raw = 1.0 - c * (-u) / denom
                    if a_raw > 0.0:
                        a = a_raw
                        da = gax * wx + gaz * wz
                        da_du = c / denom
                        scale = (-c * u / (st * denom * denom)) if st > 0.0 else 0.0
                    else:
                        a = 0.0
                        da = 0.0
                        da_du = 0.0
                        scale = 0.0
                    gf[p, 0] = a * gax + da * scale * wx
                    gf[p, 2] = a * gaz + da * scale * wz
                    gf[p, 1] = -restitution * gay + da * da_du
                else:
                    gf[p, 0] = gax
                    gf[p, 1] = gay
                    gf[p, 2] = gaz
                # gf currently holds gvh; fold into gv_prev, then rescale to gf
                gvp[p, 0] = gvp[p, 0] + delta * gf[p, 0]
                gvp[p, 1] = gvp[p, 1] + delta * gf[p, 1]
                gvp[p, 2] = gvp[p, 2] + delta * gf[p, 2]
                gf[p, 0] = (delta * dt) * gf[p, 0] / masses[p]
                gf[p, 1] = (delta * dt) * gf[p, 1] / masses[p]
                gf[p, 2] = (delta * dt) * gf[p, 2] / masses[p]

            # force accumulation backward
            for e in range(m):
                i = ei[e]
                j = ej[e]
                cbx = gf[i, 0] - gf[j, 0]
                cby = gf[i, 1] - gf[j, 1]
                cbz = gf[i, 2] - gf[j, 2]
                dx = x[j, 0] - x[i, 0]
                dy = x[j, 1] - x[i, 1]
                dz = x[j, 2] - x[i, 2]
                length = sqrt(dx * dx + dy * dy + dz * dz)
                dvx = v[j, 0] - v[i, 0]
                dvy = v[j, 1] - v[i, 1]
                dvz = v[j, 2] - v[i, 2]
                dot = cbx * dx + cby * dy + cbz * dz
                if length >= DEG_LEN:
                    coef = k[e] * (length - rest[e]) / length
                    gk[e] += dot * (length - rest[e]) / length
                    ggamma[e] += cbx * dvx + cby * dvy + cbz * dvz
                    ge = k[e] * rest[e] * dot / (length * length * length)
                    gd[e, 0] = coef * cbx + ge * dx
                    gd[e, 1] = coef * cby + ge * dy
                    gd[e, 2] = coef * cbz + ge * dz
                    gvi[e, 0] = gamma[e] * cbx
                    gvi[e, 1] = gamma[e] * cby
                    gvi[e, 2] = gamma[e] * cbz
                else:
                    gk[e] += 0.0
                    ggamma[e] += 0.0
                    gd[e, 0] = 0.0; gd[e, 1] = 0.0; gd[e, 2] = 0.0
                    gvi[e, 0] = 0.0; gvi[e, 1] = 0.0; gvi[e, 2] = 0.0
            # four scatter passes matching the np.add.at call order
            for e in range(m):
                j = ej[e]
                gxp[j, 0] += gd[e, 0]; gxp[j, 1] += gd[e, 1]; gxp[j, 2] += gd[e, 2]
            for e in range(m):
                i = ei[e]
                gxp[i, 0] += -gd[e, 0]; gxp[i, 1] += -gd[e, 1]; gxp[i, 2] += -gd[e, 2]
            for e in range(m):
                j = ej[e]
                gvp[j, 0] += gvi[e, 0]; gvp[j, 1] += gvi[e, 1]; gvp[j, 2] += gvi[e, 2]
            for e in range(m):
                i = ei[e]
                gvp[i, 0] += -gvi[e, 0]; gvp[i, 1] += -gvi[e, 1]; gvp[i, 2] += -gvi[e, 2]

            for p in range(n):
                gx[p, 0] = gxp[p, 0]; gx[p, 1] = gxp[p, 1]; gx[p, 2] = gxp[p, 2]
                gv[p, 0] = gvp[p, 0]; gv[p, 1] = gvp[p, 1]; gv[p, 2] = gvp[p, 2]
