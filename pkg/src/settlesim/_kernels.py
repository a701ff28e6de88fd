"""Compiled inner loops for both stepping schemes.

These kernels repeat the formulas of :mod:`settlesim.fluxes` (and the
percentage-scheme fluxes) in scalar form so numba can compile them; the test
suite asserts equivalence with the numpy reference path.  Each advance call
runs ``n_steps`` explicit Euler steps with frozen boundary data, counts
invariant violations (with an absolute slack for rounding), and accumulates
a per-component mass audit: signed contributions of feed, boundary fluxes
and reactions, plus their absolute magnitudes for scaling.

All loops are sequential with fixed summation order, so runs are
bit-reproducible; ``nogil`` lets independent simulations run in parallel
threads.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# Kinetics parameter vector layout used by both kernels:
# [mu_max, K_NO3, K_S, yield, decay, inert_fraction, nitrate_yield,
#  cap_mode (0 none / 1 ramp), ramp_start]
KIN_WIDTH = 9


@njit(cache=True, nogil=True)
def _clamped(x, x_max):
    if x < 0.0:
        return 0.0
    if x > x_max:
        return x_max
    return x


@njit(cache=True, nogil=True)
def _vhs(x, v0, x_bar, eta, x_max):
    x = _clamped(x, x_max)
    return v0 / (1.0 + (x / x_bar) ** eta)


@njit(cache=True, nogil=True)
def _primitive(x, lo, hi, step, values, slopes):
    if x <= lo:
        return 0.0
    if x >= hi:
        return values[values.shape[0] - 1]
    t = (x - lo) / step
    i = int(t)
    last = values.shape[0] - 2
    if i > last:
        i = last
    if i < 0:
        i = 0
    s = t - i
    y0 = values[i]
    y1 = values[i + 1]
    d0 = slopes[i] * step
    d1 = slopes[i + 1] * step
    s2 = s * s
    s3 = s2 * s
    return (y0 * (2.0 * s3 - 3.0 * s2 + 1.0) + d0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2) + d1 * (s3 - s2))


@njit(cache=True, nogil=True)
def _growth(s1, s2, mu_max, k1, k2):
    if s1 < 0.0:
        s1 = 0.0
    if s2 < 0.0:
        s2 = 0.0
    return mu_max * s1 / (k1 + s1) * s2 / (k2 + s2)


@njit(cache=True, nogil=True)
def _cap(x, cap_mode, ramp_start, x_max):
    if cap_mode == 0:
        return 1.0
    z = (x_max - x) / (x_max - ramp_start)
    if z > 1.0:
        return 1.0
    if z < 0.0:
        return 0.0
    return z


@njit(cache=True, nogil=True)
def cs_advance(solids, solubles, n_steps, dt, dz,
               area_faces, area_cells, gamma_faces, gamma_cells,
               q_face, feed_cell, feed_flow, feed_solids, feed_solubles,
               diffusion, rho_solid, x_max,
               v0, x_bar, eta,
               dc_lo, dc_hi, dc_step, dc_values, dc_slopes,
               kin_on, kin, tol, audit, audit_abs):
    cells = solids.shape[0]
    faces = cells + 1
    kc = solids.shape[1]
    ks = solubles.shape[1]
    total = np.empty(cells)
    phi_c = np.empty((faces, kc))
    phi_s = np.empty((faces, ks))
    new_c = np.empty_like(solids)
    new_s = np.empty_like(solubles)
    violations = 0

    for _ in range(n_steps):
        for j in range(cells):
            acc = 0.0
            for k in range(kc):
                acc += solids[j, k]
            total[j] = acc

        for m in range(faces):
            xl = total[m - 1] if m >= 1 else 0.0
            xr = total[m] if m < cells else 0.0
            g = gamma_faces[m]
            v = q_face[m]
            if g != 0.0:
                comp = (_primitive(xr, dc_lo, dc_hi, dc_step, dc_values, dc_slopes)
                        - _primitive(xl, dc_lo, dc_hi, dc_step, dc_values,
                                     dc_slopes)) / dz
                v += g * (_vhs(xr, v0, x_bar, eta, x_max) - comp)
            vm = v if v < 0.0 else 0.0
            vp = v if v > 0.0 else 0.0
            area = area_faces[m]
            density = 0.0
            for k in range(kc):
                cl = solids[m - 1, k] if m >= 1 else 0.0
                cr = solids[m, k] if m < cells else 0.0
                part = vm * cr + vp * cl
                density += part
                phi_c[m, k] = area * part
            carrier = rho_solid * q_face[m] - density
            cm = carrier if carrier < 0.0 else 0.0
            cp = carrier if carrier > 0.0 else 0.0
            inv_r = 1.0 / (rho_solid - xr)
            inv_l = 1.0 / (rho_solid - xl)
            for k in range(ks):
                sl = solubles[m - 1, k] if m >= 1 else 0.0
                sr = solubles[m, k] if m < cells else 0.0
                part = cm * sr * inv_r + cp * sl * inv_l
                if g != 0.0:
                    part -= g * diffusion[k] * (sr - sl) / dz
                phi_s[m, k] = area * part

        for j in range(cells):
            inv_vol = 1.0 / (area_cells[j] * dz)
            for k in range(kc):
                new_c[j, k] = solids[j, k] - dt * (phi_c[j + 1, k]
                                                   - phi_c[j, k]) * inv_vol
            for k in range(ks):
                new_s[j, k] = solubles[j, k] - dt * (phi_s[j + 1, k]
                                                     - phi_s[j, k]) * inv_vol

        inv_vol = 1.0 / (area_cells[feed_cell] * dz)
        for k in range(kc):
            load = feed_flow * feed_solids[k]
            new_c[feed_cell, k] += dt * load * inv_vol
            audit[k] += dt * load
            audit_abs[k] += dt * abs(load)
        for k in range(ks):
            load = feed_flow * feed_solubles[k]
            new_s[feed_cell, k] += dt * load * inv_vol
            audit[kc + k] += dt * load
            audit_abs[kc + k] += dt * abs(load)
        for k in range(kc):
            audit[k] -= dt * (phi_c[faces - 1, k] - phi_c[0, k])
            audit_abs[k] += dt * (abs(phi_c[faces - 1, k]) + abs(phi_c[0, k]))
        for k in range(ks):
            audit[kc + k] -= dt * (phi_s[faces - 1, k] - phi_s[0, k])
            audit_abs[kc + k] += dt * (abs(phi_s[faces - 1, k])
                                       + abs(phi_s[0, k]))

        if kin_on == 1:
            mu_max = kin[0]
            k1 = kin[1]
            k2 = kin[2]
            yld = kin[3]
            decay = kin[4]
            f_p = kin[5]
            ybar = kin[6]
            cap_mode = int(kin[7])
            ramp_start = kin[8]
            for j in range(cells):
                if gamma_cells[j] == 0.0:
                    continue
                x_oho = solids[j, 0]
                mu = _growth(solubles[j, 0], solubles[j, 1], mu_max, k1, k2)
                z = _cap(total[j], cap_mode, ramp_start, x_max)
                rc0 = x_oho * z * (mu - decay)
                rc1 = x_oho * z * (f_p * decay)
                rs0 = -ybar * mu * x_oho
                rs1 = ((1.0 - f_p) * decay - mu / yld) * x_oho
                rs2 = ybar * mu * x_oho
                new_c[j, 0] += dt * rc0
                new_c[j, 1] += dt * rc1
                new_s[j, 0] += dt * rs0
                new_s[j, 1] += dt * rs1
                new_s[j, 2] += dt * rs2
                vol = area_cells[j] * dz
                audit[0] += dt * vol * rc0
                audit[1] += dt * vol * rc1
                audit[kc + 0] += dt * vol * rs0
                audit[kc + 1] += dt * vol * rs1
                audit[kc + 2] += dt * vol * rs2
                audit_abs[0] += dt * vol * abs(rc0)
                audit_abs[1] += dt * vol * abs(rc1)
                audit_abs[kc + 0] += dt * vol * abs(rs0)
                audit_abs[kc + 1] += dt * vol * abs(rs1)
                audit_abs[kc + 2] += dt * vol * abs(rs2)

        bad = False
        for j in range(cells):
            acc = 0.0
            for k in range(kc):
                value = new_c[j, k]
                if value < -tol:
                    bad = True
                solids[j, k] = value
                acc += value
            if acc > x_max + tol:
                bad = True
            for k in range(ks):
                value = new_s[j, k]
                if value < -tol:
                    bad = True
                solubles[j, k] = value
        if bad:
            violations += 1
    return violations


@njit(cache=True, nogil=True)
def _godunov(a, b, xhat, v0, x_bar, eta, x_max):
    lo = a if a < xhat else xhat
    hi = b if b > xhat else xhat
    f_lo = lo * _vhs(lo, v0, x_bar, eta, x_max)
    f_hi = hi * _vhs(hi, v0, x_bar, eta, x_max)
    return f_lo if f_lo < f_hi else f_hi


@njit(cache=True, nogil=True)
def xp_advance(total, pct_solids, pct_liquid, n_steps, dt, dz,
               gamma_faces, gamma_cells, q_face,
               feed_cell, feed_velocity, feed_solids, feed_solubles,
               area, rho_fluid, rho_solid, ratio, x_max, xhat,
               v0, x_bar, eta,
               dp_lo, dp_hi, dp_step, dp_values, dp_slopes,
               kin_on, kin, tol, audit, audit_abs):
    cells = total.shape[0]
    faces = cells + 1
    kc = pct_solids.shape[1]
    ks = pct_liquid.shape[1]
    flux_x = np.empty(faces)
    flux_px = np.empty((faces, kc))
    flux_pl = np.empty((faces, ks))
    new_x = np.empty(cells)
    new_px = np.empty_like(pct_solids)
    new_pl = np.empty_like(pct_liquid)
    feed_total = 0.0
    for k in range(kc):
        feed_total += feed_solids[k]
    violations = 0

    for _ in range(n_steps):
        for m in range(faces):
            xl = total[m - 1] if m >= 1 else 0.0
            xr = total[m] if m < cells else 0.0
            q = q_face[m]
            qm = q if q < 0.0 else 0.0
            qp = q if q > 0.0 else 0.0
            fx = qp * xl + qm * xr
            g = gamma_faces[m]
            if g != 0.0:
                comp = (_primitive(xr, dp_lo, dp_hi, dp_step, dp_values, dp_slopes)
                        - _primitive(xl, dp_lo, dp_hi, dp_step, dp_values,
                                     dp_slopes)) / dz
                fx += g * (_godunov(xl, xr, xhat, v0, x_bar, eta, x_max) - comp)
            flux_x[m] = fx
            fm = fx if fx < 0.0 else 0.0
            fp = fx if fx > 0.0 else 0.0
            for k in range(kc):
                pl_ = pct_solids[m - 1, k] if m >= 1 else 0.0
                pr_ = pct_solids[m, k] if m < cells else 0.0
                flux_px[m, k] = fp * pl_ + fm * pr_
            fl = rho_fluid * q - ratio * fx
            lm = fl if fl < 0.0 else 0.0
            lp = fl if fl > 0.0 else 0.0
            for k in range(ks):
                pl_ = pct_liquid[m - 1, k] if m >= 1 else 0.0
                pr_ = pct_liquid[m, k] if m < cells else 0.0
                flux_pl[m, k] = lp * pl_ + lm * pr_

        mu_max = kin[0]
        k1 = kin[1]
        k2 = kin[2]
        yld = kin[3]
        decay = kin[4]
        f_p = kin[5]
        ybar = kin[6]
        cap_mode = int(kin[7])
        ramp_start = kin[8]

        for j in range(cells):
            liquid = rho_fluid - ratio * total[j]
            x_oho = pct_solids[j, 0] * total[j] if kc > 0 else 0.0
            mu = 0.0
            z = 1.0
            react = kin_on == 1 and gamma_cells[j] != 0.0
            if react:
                s1 = pct_liquid[j, 0] * liquid
                s2 = pct_liquid[j, 1] * liquid
                mu = _growth(s1, s2, mu_max, k1, k2)
                z = _cap(total[j], cap_mode, ramp_start, x_max)

            feed_here = 1.0 if j == feed_cell else 0.0
            rate_total = 0.0
            if react:
                rate_total = (mu - (1.0 - f_p) * decay) * x_oho * z
            nx = (total[j]
                  + dt / dz * (-(flux_x[j + 1] - flux_x[j])
                               + feed_here * feed_total * feed_velocity)
                  + dt * gamma_cells[j] * rate_total)
            new_x[j] = nx

            vol = area * dz
            for k in range(kc):
                rate = 0.0
                if react:
                    if k == 0:
                        rate = x_oho * z * (mu - decay)
                    elif k == 1:
                        rate = x_oho * z * (f_p * decay)
                mass = (pct_solids[j, k] * total[j]
                        + dt / dz * (-(flux_px[j + 1, k] - flux_px[j, k])
                                     + feed_here * feed_solids[k] * feed_velocity)
                        + dt * gamma_cells[j] * rate)
                if nx > 0.0:
                    new_px[j, k] = mass / nx
                else:
                    new_px[j, k] = pct_solids[j, k]
                if react:
                    audit[k] += dt * vol * rate
                    audit_abs[k] += dt * vol * abs(rate)

            new_liquid = rho_fluid - ratio * nx
            for k in range(ks):
                rate = 0.0
                if react:
                    if k == 0:
                        rate = -ybar * mu * x_oho
                    elif k == 1:
                        rate = ((1.0 - f_p) * decay - mu / yld) * x_oho
                    else:
                        rate = ybar * mu * x_oho
                mass = (pct_liquid[j, k] * liquid
                        + dt / dz * (-(flux_pl[j + 1, k] - flux_pl[j, k])
                                     + feed_here * feed_solubles[k]
                                     * feed_velocity)
                        + dt * gamma_cells[j] * rate)
                new_pl[j, k] = mass / new_liquid
                if react:
                    audit[kc + k] += dt * vol * rate
                    audit_abs[kc + k] += dt * vol * abs(rate)

        for k in range(kc):
            load = area * feed_solids[k] * feed_velocity
            out = area * (flux_px[faces - 1, k] - flux_px[0, k])
            audit[k] += dt * (load - out)
            audit_abs[k] += dt * (abs(load) + area * (abs(flux_px[faces - 1, k])
                                                      + abs(flux_px[0, k])))
        for k in range(ks):
            load = area * feed_solubles[k] * feed_velocity
            out = area * (flux_pl[faces - 1, k] - flux_pl[0, k])
            audit[kc + k] += dt * (load - out)
            audit_abs[kc + k] += dt * (abs(load)
                                       + area * (abs(flux_pl[faces - 1, k])
                                                 + abs(flux_pl[0, k])))

        bad = False
        for j in range(cells):
            nx = new_x[j]
            if nx < -tol or nx > x_max + tol:
                bad = True
            total[j] = nx
            for k in range(kc):
                value = new_px[j, k]
                if value < -tol or value > 1.0 + tol:
                    bad = True
                pct_solids[j, k] = value
            for k in range(ks):
                value = new_pl[j, k]
                if value < -tol or value > 1.0 + tol:
                    bad = True
                pct_liquid[j, k] = value
        if bad:
            violations += 1
    return violations
