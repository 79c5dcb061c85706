"""Numba kernels for the hot loops.

Variant codes: 0 basic, 1 temporary immunity, 2 border control,
3 basic constrained, 4 immunity constrained, 5 scalar LQ fixture.

phys = [epsilon, gamma, mu, p, delta, d1, d2, d3, d4]
cw   = [c1, c2, c_lam, c_nu0, c_nu, c_phi, c_i, c_e, i_bar, e_bar, pen_w,
        i_max, delta]

Scalar expressions here mirror the reference implementations in
seiropt.models term-for-term (same association order), so kernel costs agree
bit-for-bit with the pure-python quadrature; numpy_backend mirrors the same
expressions. Keep all three in sync when touching any formula.
"""

import numpy as np
from numba import njit, prange

NAME = "numba"
LAMBDA_MAX = 0.9

# termination codes for the descent loop
TERM_TOLERANCE = 0
TERM_LINE_SEARCH = 1
TERM_ITER_CAP = 2


@njit(cache=True)
def _beta(t, blo, bhi, bval, bdef):
    x = t % 4.0
    for k in range(blo.shape[0]):
        if blo[k] <= x <= bhi[k]:
            return bval[k]
    return bdef


@njit(cache=True)
def _rhs(code, phys, blo, bhi, bval, bdef, s, e, i, a1, a2, t):
    if code == 5:
        return -a1, 0.0, 0.0
    b = _beta(t, blo, bhi, bval, bdef)
    inc = b * (1.0 - a1) * s * i
    if code == 2:
        ds = -inc + a2 * phys[5]
        de = inc - phys[0] * e + a2 * phys[6]
        di = phys[0] * e - phys[1] * i + a2 * phys[7]
        return ds, de, di
    ds = -inc - phys[3] * a2 * s
    if code == 1 or code == 4:
        ds += phys[2] * (1.0 - s - e - i)
    de = inc - phys[0] * e
    di = phys[0] * e - phys[1] * i
    return ds, de, di


@njit(cache=True)
def _running_cost(code, cw, t0, s, e, i, a1, a2, t):
    if code == 5:
        return s * s + a1 * a1
    if code == 2:
        tau = t - t0
        pop = 1.0 + cw[12] * tau * a2  # cw[12] stores delta for the border cost
        return ((cw[0] + cw[1]) * i * i + 0.5 * cw[0] * (1.0 - i) * (1.0 - i)
                + cw[2] * a1 * a1 * pop
                + cw[5] * (1.0 - a2) * (1.0 - a2) * pop)
    control_part = cw[2] * a1 * a1 + (cw[3] + cw[4] * s * s) * a2 * a2
    if code == 3 or code == 4:
        viol = i - cw[11]
        if viol < 0.0:
            viol = 0.0
        return control_part + cw[10] * viol * viol
    return ((cw[0] + cw[1]) * i * i + 0.5 * cw[0] * (1.0 - i) * (1.0 - i)
            + control_part)


@njit(cache=True)
def _final_cost(code, cw, s, e, i):
    if code == 0 or code == 1:
        di = i - cw[8]
        de = e - cw[9]
        return cw[6] * di * di + cw[7] * de * de
    return 0.0


@njit(cache=True)
def forward(code, phys, blo, bhi, bval, bdef, x0, u1, u2, dt, t0, n_max):
    ys = np.empty((n_max + 1, 3))
    ys[0, 0] = x0[0]
    ys[0, 1] = x0[1]
    ys[0, 2] = x0[2]
    for n in range(n_max):
        t = t0 + n * dt
        s = ys[n, 0]
        e = ys[n, 1]
        i = ys[n, 2]
        ds, de, di = _rhs(code, phys, blo, bhi, bval, bdef, s, e, i,
                          u1[n], u2[n], t)
        ys[n + 1, 0] = s + dt * ds
        ys[n + 1, 1] = e + dt * de
        ys[n + 1, 2] = i + dt * di
    return ys


@njit(cache=True)
def cost(code, cw, t0, ys, u1, u2, dt, n_max):
    J = 0.0
    for n in range(n_max):
        t = t0 + n * dt
        J += dt * _running_cost(code, cw, t0, ys[n, 0], ys[n, 1], ys[n, 2],
                                u1[n], u2[n], t)
    J += _final_cost(code, cw, ys[n_max, 0], ys[n_max, 1], ys[n_max, 2])
    return J


@njit(cache=True)
def adjoint(code, phys, cw, blo, bhi, bval, bdef, t0, ys, u1, u2, dt, n_max):
    ps = np.empty((n_max + 1, 3))
    if code == 0 or code == 1:
        ps[n_max, 0] = 0.0
        ps[n_max, 1] = 2.0 * cw[7] * (ys[n_max, 1] - cw[9])
        ps[n_max, 2] = 2.0 * cw[6] * (ys[n_max, 2] - cw[8])
    else:
        ps[n_max, 0] = 0.0
        ps[n_max, 1] = 0.0
        ps[n_max, 2] = 0.0

    eps = phys[0]
    gam = phys[1]
    mu = phys[2]
    for n in range(n_max - 1, -1, -1):
        t = t0 + n * dt
        s = ys[n, 0]
        e = ys[n, 1]
        i = ys[n, 2]
        a1 = u1[n]
        a2 = u2[n]
        p1 = ps[n + 1, 0]
        p2 = ps[n + 1, 1]
        p3 = ps[n + 1, 2]

        if code == 5:
            ps[n, 0] = p1 + dt * (2.0 * s)
            ps[n, 1] = p2
            ps[n, 2] = p3
            continue

        b = _beta(t, blo, bhi, bval, bdef)
        bl = b * (1.0 - a1)
        # columns of the state Jacobian: fXs = d(rhs)/ds etc.
        fss = -bl * i
        fse = 0.0
        fsi = -bl * s
        if code != 2:
            fss -= phys[3] * a2
            if code == 1 or code == 4:
                fss -= mu
                fse = -mu
                fsi -= mu
        fes = bl * i
        fee = -eps
        fei = bl * s

        # running-cost state gradient
        if code == 2:
            ls = 0.0
            le = 0.0
            li = 2.0 * (cw[0] + cw[1]) * i - cw[0] * (1.0 - i)
        elif code == 3 or code == 4:
            ls = 2.0 * cw[4] * s * a2 * a2
            le = 0.0
            viol = i - cw[11]
            li = 2.0 * cw[10] * viol if viol > 0.0 else 0.0
        else:
            ls = 2.0 * cw[4] * s * a2 * a2
            le = 0.0
            li = 2.0 * (cw[0] + cw[1]) * i - cw[0] * (1.0 - i)

        ps[n, 0] = p1 + dt * (fss * p1 + fes * p2 + ls)
        ps[n, 1] = p2 + dt * (fse * p1 + fee * p2 + eps * p3 + le)
        ps[n, 2] = p3 + dt * (fsi * p1 + fei * p2 - gam * p3 + li)
    return ps


@njit(cache=True)
def control_gradient(code, phys, cw, blo, bhi, bval, bdef, t0,
                     ys, ps, u1, u2, dt, n_max, g1, g2):
    """g_n = grad_alpha l(y_n,u_n,t_n) + grad_alpha f(y_n,u_n,t_n)^T p_{n+1}.

    The terminal control never enters the Euler cost; its gradient is zero.
    """
    for n in range(n_max):
        t = t0 + n * dt
        s = ys[n, 0]
        i = ys[n, 2]
        a1 = u1[n]
        a2 = u2[n]
        p1 = ps[n + 1, 0]
        p2 = ps[n + 1, 1]
        p3 = ps[n + 1, 2]

        if code == 5:
            g1[n] = 2.0 * a1 - p1
            g2[n] = 0.0
            continue

        b = _beta(t, blo, bhi, bval, bdef)
        bsi = b * s * i
        if code == 2:
            tau = t - t0
            dtau = cw[12] * tau
            pop = 1.0 + dtau * a2
            g1[n] = 2.0 * cw[2] * a1 * pop + bsi * (p1 - p2)
            g2[n] = (cw[2] * a1 * a1 * dtau
                     - 2.0 * cw[5] * (1.0 - a2) * pop
                     + cw[5] * (1.0 - a2) * (1.0 - a2) * dtau
                     + phys[5] * p1 + phys[6] * p2 + phys[7] * p3)
        else:
            g1[n] = 2.0 * cw[2] * a1 + bsi * (p1 - p2)
            g2[n] = 2.0 * (cw[3] + cw[4] * s * s) * a2 - phys[3] * s * p1
    g1[n_max] = 0.0
    g2[n_max] = 0.0


@njit(cache=True)
def project(u1, u2, u2max, n_max):
    """Component-wise clamp onto the time-dependent control box, in place."""
    for n in range(n_max + 1):
        if u1[n] < 0.0:
            u1[n] = 0.0
        elif u1[n] > LAMBDA_MAX:
            u1[n] = LAMBDA_MAX
        m = u2max[n]
        if u2[n] < 0.0:
            u2[n] = 0.0
        elif u2[n] > m:
            u2[n] = m


@njit(cache=True)
def dal_loop(code, phys, cw, blo, bhi, bval, bdef, t0, x0,
             u1, u2, u2max, dt, n_max,
             sigma0, eps, max_iters, max_halv, history):
    """Projected gradient descent with bisection line search.

    sigma resets to sigma0 every outer iteration and halves until the
    candidate strictly decreases J; termination on |dJ| < eps, the iteration
    cap, or a failed line search (best iterate returned in all cases).
    """
    project(u1, u2, u2max, n_max)
    ys = forward(code, phys, blo, bhi, bval, bdef, x0, u1, u2, dt, t0, n_max)
    J = cost(code, cw, t0, ys, u1, u2, dt, n_max)
    history[0] = J
    hist_n = 1
    g1 = np.zeros(n_max + 1)
    g2 = np.zeros(n_max + 1)
    term = TERM_ITER_CAP
    iters = max_iters

    for it in range(1, max_iters + 1):
        ps = adjoint(code, phys, cw, blo, bhi, bval, bdef, t0,
                     ys, u1, u2, dt, n_max)
        control_gradient(code, phys, cw, blo, bhi, bval, bdef, t0,
                         ys, ps, u1, u2, dt, n_max, g1, g2)
        sigma = sigma0
        accepted = False
        c1 = u1
        c2 = u2
        ys_c = ys
        Jc = J
        for _ in range(max_halv + 1):
            c1 = u1 - sigma * g1
            c2 = u2 - sigma * g2
            project(c1, c2, u2max, n_max)
            ys_c = forward(code, phys, blo, bhi, bval, bdef, x0,
                           c1, c2, dt, t0, n_max)
            Jc = cost(code, cw, t0, ys_c, c1, c2, dt, n_max)
            if Jc < J:
                accepted = True
                break
            sigma *= 0.5
        if not accepted:
            term = TERM_LINE_SEARCH
            iters = it
            break
        dJ = J - Jc
        u1 = c1
        u2 = c2
        ys = ys_c
        J = Jc
        history[hist_n] = J
        hist_n += 1
        if dJ < eps:
            term = TERM_TOLERANCE
            iters = it
            break

    # final gradient for diagnostics
    ps = adjoint(code, phys, cw, blo, bhi, bval, bdef, t0, ys, u1, u2, dt, n_max)
    control_gradient(code, phys, cw, blo, bhi, bval, bdef, t0,
                     ys, ps, u1, u2, dt, n_max, g1, g2)
    return u1, u2, ys, ps, J, iters, term, hist_n, g1, g2


# ---------------------------------------------------------------------------
# semi-Lagrangian HJB

@njit(cache=True)
def interp3(vals, nx, x, y, z):
    """Trilinear interpolation on the unit cube, x clamped per component.

    vals is one value slice, flat, x-fastest. Mirrored by the python oracle;
    keep the expression structure unchanged.
    """
    if x < 0.0:
        x = 0.0
    elif x > 1.0:
        x = 1.0
    if y < 0.0:
        y = 0.0
    elif y > 1.0:
        y = 1.0
    if z < 0.0:
        z = 0.0
    elif z > 1.0:
        z = 1.0
    gx = x * (nx - 1)
    gy = y * (nx - 1)
    gz = z * (nx - 1)
    ix = int(gx)
    iy = int(gy)
    iz = int(gz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > nx - 2:
        iy = nx - 2
    if iz > nx - 2:
        iz = nx - 2
    tx = gx - ix
    ty = gy - iy
    tz = gz - iz
    nxy = nx * nx
    b = ix + nx * iy + nxy * iz
    v000 = vals[b]
    v100 = vals[b + 1]
    v010 = vals[b + nx]
    v110 = vals[b + nx + 1]
    v001 = vals[b + nxy]
    v101 = vals[b + nxy + 1]
    v011 = vals[b + nxy + nx]
    v111 = vals[b + nxy + nx + 1]
    c00 = v000 * (1.0 - tx) + v100 * tx
    c10 = v010 * (1.0 - tx) + v110 * tx
    c01 = v001 * (1.0 - tx) + v101 * tx
    c11 = v011 * (1.0 - tx) + v111 * tx
    c0 = c00 * (1.0 - ty) + c10 * ty
    c1 = c01 * (1.0 - ty) + c11 * ty
    return c0 * (1.0 - tz) + c1 * tz


@njit(cache=True)
def _scan_point(code, phys, cw, blo, bhi, bval, bdef, t0,
                Vn1, nx, s, e, i, t, u1_mesh, u2v, m2_eff, dt):
    """Minimize V^{n+1}(x + dt f(x,a,t)) + dt l(x,a,t) over the control
    mesh at one state point. Ties break to the lowest (u1-major) index."""
    # dynamics split: f = f0 + a1*f1 + a2*f2, with f1z = 0 for every variant
    if code == 5:
        f0x = 0.0
        f0y = 0.0
        f0z = 0.0
        f1x = -1.0
        f1y = 0.0
        f2x = 0.0
        f2y = 0.0
        f2z = 0.0
    else:
        b = _beta(t, blo, bhi, bval, bdef)
        bsi = b * s * i
        f0x = -bsi
        f0y = bsi - phys[0] * e
        f0z = phys[0] * e - phys[1] * i
        f1x = bsi
        f1y = -bsi
        if code == 2:
            f2x = phys[5]
            f2y = phys[6]
            f2z = phys[7]
        else:
            f2x = -phys[3] * s
            f2y = 0.0
            f2z = 0.0
            if code == 1 or code == 4:
                f0x += phys[2] * (1.0 - s - e - i)

    bx = s + dt * f0x
    by = e + dt * f0y
    bz = i + dt * f0z
    w1x = dt * f1x
    w1y = dt * f1y
    w2x = dt * f2x
    w2y = dt * f2y
    w2z = dt * f2z

    best = np.inf
    b1 = 0
    b2 = 0
    for j1 in range(u1_mesh.shape[0]):
        a1 = u1_mesh[j1]
        bx1 = bx + a1 * w1x
        by1 = by + a1 * w1y
        for j2 in range(m2_eff):
            a2 = u2v[j2]
            fx = bx1 + a2 * w2x
            fy = by1 + a2 * w2y
            fz = bz + a2 * w2z
            val = (interp3(Vn1, nx, fx, fy, fz)
                   + dt * _running_cost(code, cw, t0, s, e, i, a1, a2, t))
            if val < best:
                best = val
                b1 = j1
                b2 = j2
    return best, b1, b2


@njit(cache=True, parallel=True)
def hjb_solve(code, phys, cw, blo, bhi, bval, bdef, t0,
              nx, active_idx, V, P1, P2, u1_mesh, u2_frac, u2max, dt, n_max):
    """Backward sweep filling V (n_max+1 slices) and the policy indices.

    V must arrive initialized with the terminal cost in every slice (the
    inactive nodes keep those values). The u2 mesh is u2max[n] * u2_frac,
    degenerating to the single point 0 when u2max[n] = 0.
    """
    dx = 1.0 / (nx - 1)
    nxy = nx * nx
    m2 = u2_frac.shape[0]
    u2v = np.empty(m2)
    for n in range(n_max - 1, -1, -1):
        t = t0 + n * dt
        u2m = u2max[n]
        if u2m == 0.0:
            m2_eff = 1
            u2v[0] = 0.0
        else:
            m2_eff = m2
            for j in range(m2):
                u2v[j] = u2m * u2_frac[j]
        Vn1 = V[n + 1]
        Vn = V[n]
        p1s = P1[n]
        p2s = P2[n]
        for kk in prange(active_idx.shape[0]):
            node = active_idx[kk]
            iz = node // nxy
            iy = (node // nx) % nx
            ix = node % nx
            s = ix * dx
            e = iy * dx
            i = iz * dx
            best, b1, b2 = _scan_point(code, phys, cw, blo, bhi, bval, bdef,
                                       t0, Vn1, nx, s, e, i, t,
                                       u1_mesh, u2v, m2_eff, dt)
            Vn[node] = best
            p1s[node] = np.uint16(b1)
            p2s[node] = np.uint16(b2)


@njit(cache=True)
def synth_point(code, phys, cw, blo, bhi, bval, bdef, t0,
                Vn1, nx, s, e, i, t, u1_mesh, u2_frac, u2m, dt):
    """Feedback synthesis at an arbitrary state point: same minimization as
    the solver's node update, evaluated at the query point."""
    m2 = u2_frac.shape[0]
    u2v = np.empty(m2)
    if u2m == 0.0:
        m2_eff = 1
        u2v[0] = 0.0
    else:
        m2_eff = m2
        for j in range(m2):
            u2v[j] = u2m * u2_frac[j]
    return _scan_point(code, phys, cw, blo, bhi, bval, bdef, t0,
                       Vn1, nx, s, e, i, t, u1_mesh, u2v, m2_eff, dt)
