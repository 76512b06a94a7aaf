"""NumPy implementation of the hot simulation kernels.

This is the fallback backend; `springfit._kernels` is the compiled twin with
identical signatures and bit-identical arithmetic (same operation order, no
FMA contraction). Keep the two in lockstep: every formula here is written
component-wise in the same association order as the C loops.

State layout: history arrays hx, hv have shape (substeps + 1, n, 3); row 0 is
the frame's initial state and the kernel fills rows 1..substeps. The backward
kernel consumes the same history and turns adjoints of the final row into
adjoints of row 0 while accumulating per-edge stiffness/dashpot gradients.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

# Below this inter-point distance a spring is treated as degenerate: it
# produces no force and is reported through the degenerate counter.
DEGENERATE_LENGTH = 1e-9
# Regularizer in the tangential friction scale denominator.
TANGENT_EPS = 1e-10


def _spring_dashpot_terms(x, v, ei, ej, rest, k, gamma):
    """Per-edge combined force on endpoint i, plus reusable intermediates."""
    d = x[ej] - x[ei]
    length = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2)
    ok = length >= DEGENERATE_LENGTH
    safe = np.where(ok, length, 1.0)
    coef = np.where(ok, k * (safe - rest) / safe, 0.0)
    dv = v[ej] - v[ei]
    comb = coef[:, None] * d + np.where(ok, gamma, 0.0)[:, None] * dv
    return comb, d, length, ok, coef, dv


def accumulate_forces(x, v, ei, ej, rest, k, gamma, masses, gravity, out_f):
    """Net force per point: springs + dashpots + gravity. Returns the number
    of degenerate (near-coincident) springs encountered."""
    out_f[:] = masses[:, None] * gravity[None, :]
    if ei.shape[0]:
        comb, _, _, ok, _, _ = _spring_dashpot_terms(x, v, ei, ej, rest, k, gamma)
        np.add.at(out_f, ei, comb)
        np.add.at(out_f, ej, -comb)
        return int(np.count_nonzero(~ok))
    return 0


def _collide(x, vh, ground, restitution, friction):
    """Impulse response against the ground plane applied to velocities vh.

    Returns (v_new, contact_mask). A point is in contact when it sits below
    the plane and moves downward; its normal velocity reflects scaled by the
    restitution and the tangential part shrinks by the friction factor.
    """
    contact = (x[:, 1] < ground) & (vh[:, 1] < 0.0)
    v_new = vh.copy()
    if np.any(contact):
        c = friction * (1.0 + restitution)
        u = vh[contact, 1]
        wx = vh[contact, 0]
        wz = vh[contact, 2]
        st = np.sqrt(wx * wx + wz * wz)
        denom = st + TANGENT_EPS
        a = 1.0 - c * (-u) / denom
        a = np.where(a > 0.0, a, 0.0)
        v_new[contact, 0] = a * wx
        v_new[contact, 1] = -restitution * u
        v_new[contact, 2] = a * wz
    return v_new, contact


def frame_forward(hx, hv, ei, ej, rest, k, gamma, masses, gravity,
                  delta, dt, ground, restitution, friction,
                  ctrl_idx, ctrl_from, ctrl_to, substeps):
    """Advance one frame of `substeps` substeps, recording every substep.

    hx[0], hv[0] hold the initial state; rows 1..substeps are written.
    Control targets interpolate linearly from ctrl_from to ctrl_to over the
    frame. Returns the degenerate-spring count summed over substeps.
    """
    n_deg = 0
    f = np.empty_like(hx[0])
    for s in range(substeps):
        x = hx[s]
        v = hv[s]
        n_deg += accumulate_forces(x, v, ei, ej, rest, k, gamma, masses, gravity, f)
        vh = delta * (v + (dt * f) / masses[:, None])
        v_new, contact = _collide(x, vh, ground, restitution, friction)
        x_new = x + dt * v_new
        clamp = contact & (x_new[:, 1] < ground)
        x_new[clamp, 1] = ground
        if ctrl_idx.shape[0]:
            t = (s + 1.0) / substeps
            target = ctrl_from + (ctrl_to - ctrl_from) * t
            v_new[ctrl_idx] = (target - x[ctrl_idx]) / dt
            x_new[ctrl_idx] = target
        hx[s + 1] = x_new
        hv[s + 1] = v_new
    return n_deg


def frame_backward(hx, hv, ei, ej, rest, k, gamma, masses, gravity,
                   delta, dt, ground, restitution, friction,
                   ctrl_idx, ctrl_from, ctrl_to, substeps,
                   gx, gv, gk, ggamma):
    """Adjoint of frame_forward over the recorded history.

    On entry gx, gv are the loss adjoints of the frame's final state; on exit
    they hold the adjoints of the initial state. gk, ggamma accumulate
    per-edge parameter gradients. Collision and clamp branches are frozen to
    the decisions replayed from the forward history.
    """
    m_col = masses[:, None]
    for s in range(substeps - 1, -1, -1):
        x = hx[s]
        v = hv[s]

        # Replay the substep to recover branch decisions and intermediates.
        f = np.empty_like(x)
        accumulate_forces(x, v, ei, ej, rest, k, gamma, masses, gravity, f)
        vh = delta * (v + (dt * f) / m_col)
        v_new, contact = _collide(x, vh, ground, restitution, friction)
        x_raw_y = x[:, 1] + dt * v_new[:, 1]
        clamp = contact & (x_raw_y < ground)

        gx_out = gx.copy()
        gv_out = gv.copy()
        gx_prev = np.zeros_like(gx)
        gv_prev = np.zeros_like(gv)

        # Control override: outputs at control rows are (target, (target-x)/dt).
        if ctrl_idx.shape[0]:
            gx_prev[ctrl_idx] -= gv_out[ctrl_idx] / dt
            gx_out[ctrl_idx] = 0.0
            gv_out[ctrl_idx] = 0.0

        # Ground clamp: clamped y-coordinates are constants.
        gx_out[clamp, 1] = 0.0

        # x_new = x + dt * v_new
        gx_prev += gx_out
        gvn = gv_out + dt * gx_out

        # Collision backward (frozen contact branch).
        gvh = gvn.copy()
        if np.any(contact):
            c = friction * (1.0 + restitution)
            u = vh[contact, 1]
            wx = vh[contact, 0]
            wz = vh[contact, 2]
            st = np.sqrt(wx * wx + wz * wz)
            denom = st + TANGENT_EPS
            a_raw = 1.0 - c * (-u) / denom
            live = a_raw > 0.0
            a = np.where(live, a_raw, 0.0)
            gax = gvn[contact, 0]
            gay = gvn[contact, 1]
            gaz = gvn[contact, 2]
            da = np.where(live, gax * wx + gaz * wz, 0.0)
            da_du = np.where(live, c / denom, 0.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                scale = np.where(live & (st > 0.0), -c * u / (st * denom * denom), 0.0)
            gvh[contact, 0] = a * gax + da * scale * wx
            gvh[contact, 2] = a * gaz + da * scale * wz
            gvh[contact, 1] = -restitution * gay + da * da_du

        # vh = delta * (v + dt*f/m)
        gv_prev += delta * gvh
        gf = (delta * dt) * gvh / m_col

        # Force accumulation backward.
        if ei.shape[0]:
            comb_bar = gf[ei] - gf[ej]
            _, d, length, ok, coef, dv = _spring_dashpot_terms(x, v, ei, ej, rest, k, gamma)
            dot = comb_bar[:, 0] * d[:, 0] + comb_bar[:, 1] * d[:, 1] + comb_bar[:, 2] * d[:, 2]
            safe = np.where(ok, length, 1.0)
            gk_e = np.where(ok, dot * (safe - rest) / safe, 0.0)
            gg_e = np.where(
                ok,
                comb_bar[:, 0] * dv[:, 0] + comb_bar[:, 1] * dv[:, 1] + comb_bar[:, 2] * dv[:, 2],
                0.0,
            )
            gk += gk_e
            ggamma += gg_e
            gd = coef[:, None] * comb_bar \
                + np.where(ok, k * rest * dot / (safe * safe * safe), 0.0)[:, None] * d
            gd[~ok] = 0.0
            gvi = np.where(ok, gamma, 0.0)[:, None] * comb_bar
            np.add.at(gx_prev, ej, gd)
            np.add.at(gx_prev, ei, -gd)
            np.add.at(gv_prev, ej, gvi)
            np.add.at(gv_prev, ei, -gvi)

        gx[:] = gx_prev
        gv[:] = gv_prev
