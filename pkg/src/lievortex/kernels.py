"""Hot numeric kernels.

Everything here is written in a numpy subset that numba can compile; with
``LIEVORTEX_DISABLE_JIT=1`` the same functions run as plain numpy.  Skew
matrices travel either as dense ``(n, n)`` arrays or as upper-triangle
coordinate vectors addressed by the index arrays ``iu, ju`` (lexicographic
``i < j``).  The inverse inertia operator is always passed as its dense
matrix ``ainv`` acting on those coordinates.
"""
import math

import numpy as np

from ._jit import kernel


@kernel
def vec_skew(x, iu, ju):
    out = np.empty(iu.shape[0])
    for k in range(iu.shape[0]):
        out[k] = x[iu[k], ju[k]]
    return out


@kernel
def unvec_skew(c, n, iu, ju):
    out = np.zeros((n, n))
    for k in range(iu.shape[0]):
        out[iu[k], ju[k]] = c[k]
        out[ju[k], iu[k]] = -c[k]
    return out


@kernel
def commutator(a, b):
    return a @ b - b @ a


@kernel
def expm_skew(x):
    """Matrix exponential of a real skew matrix.

    Rodrigues' formula for n == 3, otherwise scaling-and-squaring around a
    degree-16 Taylor core (truncation below 1e-20 after scaling to norm 1/4).
    """
    n = x.shape[0]
    eye = np.eye(n)
    if n == 3:
        theta2 = x[0, 1] * x[0, 1] + x[0, 2] * x[0, 2] + x[1, 2] * x[1, 2]
        theta = math.sqrt(theta2)
        if theta < 1e-4:
            a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
            b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
        else:
            a = math.sin(theta) / theta
            b = (1.0 - math.cos(theta)) / theta2
        return eye + a * x + b * (x @ x)
    norm = 0.0
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += abs(x[i, j])
        if s > norm:
            norm = s
    squarings = 0
    if norm > 0.25:
        squarings = int(math.ceil(math.log2(norm / 0.25)))
    y = x / (2.0 ** squarings)
    result = eye.copy()
    term = eye.copy()
    for k in range(1, 17):
        term = (term @ y) / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


@kernel
def dexpinv_left(u, w):
    # g = g0 exp(u), g^-1 g' = w  =>  u' = w + [u,w]/2 + [u,[u,w]]/12 + O(u^4)
    uw = u @ w - w @ u
    return w + 0.5 * uw + (u @ uw - uw @ u) / 12.0


@kernel
def dexpinv_right(u, w):
    # g = exp(u) g0, g' g^-1 = w  =>  u' = w - [u,w]/2 + [u,[u,w]]/12 + O(u^4)
    uw = u @ w - w @ u
    return w - 0.5 * uw + (u @ uw - uw @ u) / 12.0


@kernel
def apply_ainv(m, ainv, iu, ju):
    n = m.shape[0]
    return unvec_skew(ainv @ vec_skew(m, iu, ju), n, iu, ju)


@kernel
def body_velocity(g, m_s, ainv, iu, ju, shift):
    """Left-trivialised reduced field: A^-1(g^T m_s g) + shift."""
    mc = g.T @ m_s @ g
    return apply_ainv(mc, ainv, iu, ju) + shift


@kernel
def reduced_step(g, m_s, ainv, iu, ju, shift, h):
    """One RKMK4 step of  g' = g (A^-1(g^T m_s g) + shift)."""
    k1 = h * body_velocity(g, m_s, ainv, iu, ju, shift)
    u = 0.5 * k1
    k2 = h * dexpinv_left(u, body_velocity(g @ expm_skew(u), m_s, ainv, iu, ju, shift))
    u = 0.5 * k2
    k3 = h * dexpinv_left(u, body_velocity(g @ expm_skew(u), m_s, ainv, iu, ju, shift))
    u = k3
    k4 = h * dexpinv_left(u, body_velocity(g @ expm_skew(u), m_s, ainv, iu, ju, shift))
    theta = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return g @ expm_skew(theta)


@kernel
def coupled_step(g, m, ainv, iu, ju, lam, h):
    """One step of the Euler equations plus reconstruction.

    m' = m w - w m with w = A^-1 m + lam (classical RK4), and g' = g w
    (RKMK4 sharing the same stages).
    """
    w1 = apply_ainv(m, ainv, iu, ju) + lam
    dm1 = m @ w1 - w1 @ m
    k1 = h * w1

    m2 = m + 0.5 * h * dm1
    w2 = apply_ainv(m2, ainv, iu, ju) + lam
    dm2 = m2 @ w2 - w2 @ m2
    k2 = h * dexpinv_left(0.5 * k1, w2)

    m3 = m + 0.5 * h * dm2
    w3 = apply_ainv(m3, ainv, iu, ju) + lam
    dm3 = m3 @ w3 - w3 @ m3
    k3 = h * dexpinv_left(0.5 * k2, w3)

    m4 = m + h * dm3
    w4 = apply_ainv(m4, ainv, iu, ju) + lam
    dm4 = m4 @ w4 - w4 @ m4
    k4 = h * dexpinv_left(k3, w4)

    theta = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    m_new = m + h * (dm1 + 2.0 * dm2 + 2.0 * dm3 + dm4) / 6.0
    return g @ expm_skew(theta), m_new


@kernel
def coupled_trajectory(g0, m0, ainv, iu, ju, lam, h, steps):
    n = g0.shape[0]
    gs = np.empty((steps + 1, n, n))
    ms = np.empty((steps + 1, n, n))
    gs[0] = g0
    ms[0] = m0
    g = g0.copy()
    m = m0.copy()
    for s in range(steps):
        g, m = coupled_step(g, m, ainv, iu, ju, lam, h)
        gs[s + 1] = g
        ms[s + 1] = m
    return gs, ms


@kernel
def reduced_trajectory(g0, m_s, ainv, iu, ju, shift, h, steps):
    n = g0.shape[0]
    gs = np.empty((steps + 1, n, n))
    gs[0] = g0
    g = g0.copy()
    for s in range(steps):
        g = reduced_step(g, m_s, ainv, iu, ju, shift, h)
        gs[s + 1] = g
    return gs


@kernel
def segment_shifts(lam, dirs, values):
    # shift_j = lam - sum_i u_ji * Lambda_i
    nseg = values.shape[0]
    n = lam.shape[0]
    out = np.empty((nseg, n, n))
    for j in range(nseg):
        s = lam.copy()
        for i in range(dirs.shape[0]):
            s = s - values[j, i] * dirs[i]
        out[j] = s
    return out


@kernel
def controlled_rollout(g0, m_s, ainv, iu, ju, lam, dirs, values, h, steps_per_segment):
    """Endpoint of the piecewise-constant controlled flow.  A negative ``h``
    runs the segments in reverse order, backwards in time."""
    shifts = segment_shifts(lam, dirs, values)
    nseg = values.shape[0]
    g = g0.copy()
    for jj in range(nseg):
        j = jj if h > 0 else nseg - 1 - jj
        for _ in range(steps_per_segment):
            g = reduced_step(g, m_s, ainv, iu, ju, shifts[j], h)
    return g


@kernel
def controlled_trajectory(g0, m_s, ainv, iu, ju, lam, dirs, values, h, steps_per_segment):
    shifts = segment_shifts(lam, dirs, values)
    nseg = values.shape[0]
    n = g0.shape[0]
    gs = np.empty((nseg * steps_per_segment + 1, n, n))
    gs[0] = g0
    g = g0.copy()
    idx = 1
    for j in range(nseg):
        for _ in range(steps_per_segment):
            g = reduced_step(g, m_s, ainv, iu, ju, shifts[j], h)
            gs[idx] = g
            idx += 1
    return gs


@kernel
def controlled_jacobian(g0, m_s, ainv, iu, ju, lam, dirs, values, h, steps_per_segment, fd_step):
    """Endpoint and forward-difference Jacobian of vec(g(T)) in the segment values.

    Segment endpoints of the nominal run are cached so a perturbation of
    segment j only re-integrates segments j..N-1.
    """
    shifts = segment_shifts(lam, dirs, values)
    nseg = values.shape[0]
    ncontrols = dirs.shape[0]
    n = g0.shape[0]
    prefix = np.empty((nseg + 1, n, n))
    prefix[0] = g0
    g = g0.copy()
    for j in range(nseg):
        for _ in range(steps_per_segment):
            g = reduced_step(g, m_s, ainv, iu, ju, shifts[j], h)
        prefix[j + 1] = g
    g_end = prefix[nseg]
    jac = np.empty((n * n, nseg * ncontrols))
    for j in range(nseg):
        for i in range(ncontrols):
            shift = shifts[j] - fd_step * dirs[i]
            gp = prefix[j].copy()
            for _ in range(steps_per_segment):
                gp = reduced_step(gp, m_s, ainv, iu, ju, shift, h)
            for jj in range(j + 1, nseg):
                for _ in range(steps_per_segment):
                    gp = reduced_step(gp, m_s, ainv, iu, ju, shifts[jj], h)
            diff = (gp - g_end) / fd_step
            col = j * ncontrols + i
            for a in range(n):
                for b in range(n):
                    jac[a * n + b, col] = diff[a, b]
    return g_end, jac


@kernel
def frame_velocity(z, half, ainv, iu, ju, shift):
    """Omega_c = A^-1(X^T Y - Y^T X) + shift for the stacked frame z = [X; Y]."""
    x = z[:half]
    y = z[half:]
    mc = x.T @ y - y.T @ x
    return apply_ainv(mc, ainv, iu, ju) + shift


@kernel
def frame_step(z, half, ainv, iu, ju, shift, h):
    """RKMK4 step for the frame rows, z' = z Omega_c.  Returns the new frame and
    the right factor exp(theta) it was multiplied by."""
    k1 = h * frame_velocity(z, half, ainv, iu, ju, shift)
    u = 0.5 * k1
    k2 = h * dexpinv_left(u, frame_velocity(z @ expm_skew(u), half, ainv, iu, ju, shift))
    u = 0.5 * k2
    k3 = h * dexpinv_left(u, frame_velocity(z @ expm_skew(u), half, ainv, iu, ju, shift))
    u = k3
    k4 = h * dexpinv_left(u, frame_velocity(z @ expm_skew(u), half, ainv, iu, ju, shift))
    theta = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    r = expm_skew(theta)
    return z @ r, r


@kernel
def frame_trajectory(z0, half, ainv, iu, ju, shifts, h, steps_per_segment):
    nseg = shifts.shape[0]
    total = nseg * steps_per_segment
    zs = np.empty((total + 1, z0.shape[0], z0.shape[1]))
    rot = np.empty((total + 1, z0.shape[1], z0.shape[1]))
    zs[0] = z0
    rot[0] = np.eye(z0.shape[1])
    z = z0.copy()
    r_acc = np.eye(z0.shape[1])
    idx = 1
    for j in range(nseg):
        for _ in range(steps_per_segment):
            z, r = frame_step(z, half, ainv, iu, ju, shifts[j], h)
            r_acc = r_acc @ r
            zs[idx] = z
            rot[idx] = r_acc
            idx += 1
    return zs, rot
