# cython: language_level=3
"""Compiled RK4 kernels.

Every function here has a line-for-line twin in ``_pycore.py``; both must
perform the same floating-point operations in the same order.

Diode arrays: ``bp`` (positive breakpoints), ``sl`` (slopes, innermost
first), ``gb`` (g at each breakpoint), ``nb`` breakpoints in use. Circuit
constants ``cc`` = (c1, c2, l).
"""

from libc.math cimport fabs, sin, log, sqrt


cdef inline double _g(double v, const double* bp, const double* sl,
                      const double* gb, int nb) noexcept nogil:
    cdef double a = fabs(v)
    cdef double r
    cdef int k = 0
    while k < nb and a > bp[k]:
        k += 1
    if k == 0:
        r = sl[0] * a
    else:
        r = gb[k - 1] + sl[k] * (a - bp[k - 1])
    if v >= 0:
        return r
    return -r


cdef inline void _f(double x, double y, double z, double r0,
                    double c1, double c2, double l,
                    const double* bp, const double* sl, const double* gb, int nb,
                    double* d) noexcept nogil:
    d[0] = ((y - x) / r0 - _g(x, bp, sl, gb, nb)) / c1
    d[1] = ((x - y) / r0 + z) / c2
    d[2] = -y / l


cdef inline void _rk4(double* u, double dt, double ra, double rb, double rc,
                      double c1, double c2, double l,
                      const double* bp, const double* sl, const double* gb, int nb) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double hh = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef double x = u[0], y = u[1], z = u[2]
    _f(x, y, z, ra, c1, c2, l, bp, sl, gb, nb, k1)
    _f(x + hh * k1[0], y + hh * k1[1], z + hh * k1[2], rb, c1, c2, l, bp, sl, gb, nb, k2)
    _f(x + hh * k2[0], y + hh * k2[1], z + hh * k2[2], rb, c1, c2, l, bp, sl, gb, nb, k3)
    _f(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], rc, c1, c2, l, bp, sl, gb, nb, k4)
    u[0] = x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    u[1] = y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    u[2] = z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])


cdef inline bint _bad(const double* u, int n, double limit) noexcept nogil:
    cdef int i
    for i in range(n):
        if not (fabs(u[i]) <= limit):
            return True
    return False


def integrate(double[::1] state, long k0, long nsteps, double dt, double[::1] cc,
              double r0c, double r0d, double r0w,
              double[::1] bp, double[::1] sl, double[::1] gb, int nb,
              long rec_every, double[:, ::1] out, long pos, double limit):
    """Advance ``state`` in place by ``nsteps`` steps starting at step ``k0``.

    r0(t) = r0c + r0d*sin(r0w*t). After global step j (1-based), the state is
    written to ``out[pos]`` when ``j % rec_every == 0``. Returns
    ``(pos, bad_step)`` with ``bad_step == -1`` unless the state diverged.
    """
    cdef double u[3]
    cdef long i, j
    cdef double t, ra, rb, rc
    cdef double c1 = cc[0], c2 = cc[1], l = cc[2]
    cdef bint varying = r0d != 0.0
    cdef long bad = -1
    u[0] = state[0]; u[1] = state[1]; u[2] = state[2]
    ra = r0c; rb = r0c; rc = r0c
    with nogil:
        for i in range(nsteps):
            j = k0 + i
            if varying:
                t = j * dt
                ra = r0c + r0d * sin(r0w * t)
                rb = r0c + r0d * sin(r0w * (t + 0.5 * dt))
                rc = r0c + r0d * sin(r0w * (t + dt))
            _rk4(u, dt, ra, rb, rc, c1, c2, l, &bp[0], &sl[0], &gb[0], nb)
            if _bad(u, 3, limit):
                bad = j + 1
                break
            if (j + 1) % rec_every == 0:
                out[pos, 0] = u[0]; out[pos, 1] = u[1]; out[pos, 2] = u[2]
                pos += 1
    state[0] = u[0]; state[1] = u[1]; state[2] = u[2]
    return pos, bad


cdef inline void _f_pair(const double* u, double r0m, double r0s,
                         const double* cm, const double* cs,
                         const double* bpm, const double* slm, const double* gbm, int nbm,
                         const double* bps, const double* sls, const double* gbs, int nbs,
                         int mode, int drive, double rcoup, double* d) noexcept nogil:
    cdef double v[3]
    _f(u[0], u[1], u[2], r0m, cm[0], cm[1], cm[2], bpm, slm, gbm, nbm, d)
    v[0] = u[3]; v[1] = u[4]; v[2] = u[5]
    if mode == 1:
        v[drive] = u[drive]
    _f(v[0], v[1], v[2], r0s, cs[0], cs[1], cs[2], bps, sls, gbs, nbs, d + 3)
    if mode == 1:
        d[3 + drive] = d[drive]
    elif mode == 2:
        d[3 + drive] = d[3 + drive] + (u[drive] - v[drive]) / rcoup / cs[drive]


def integrate_pair(double[::1] state, long k0, long nsteps, double dt,
                   double[::1] cm, double r0m, double[::1] cs, double r0s,
                   double[::1] bpm, double[::1] slm, double[::1] gbm, int nbm,
                   double[::1] bps, double[::1] sls, double[::1] gbs, int nbs,
                   int mode, int drive, double rcoup,
                   long rec_every, double[:, ::1] out, long pos, double limit):
    """Master (state[:3]) and slave (state[3:]) advanced in lockstep.

    mode 0: independent; 1: slave's ``drive`` component replaced by the
    master's; 2: coupling current (master - slave)/rcoup into the slave node
    ``drive``. Recording and return value as in :func:`integrate`.
    """
    cdef double u[6]
    cdef double w[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double hh = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef long i, j, bad = -1
    cdef int q
    for q in range(6):
        u[q] = state[q]
    with nogil:
        for i in range(nsteps):
            j = k0 + i
            _f_pair(u, r0m, r0s, &cm[0], &cs[0], &bpm[0], &slm[0], &gbm[0], nbm,
                    &bps[0], &sls[0], &gbs[0], nbs, mode, drive, rcoup, k1)
            for q in range(6):
                w[q] = u[q] + hh * k1[q]
            _f_pair(w, r0m, r0s, &cm[0], &cs[0], &bpm[0], &slm[0], &gbm[0], nbm,
                    &bps[0], &sls[0], &gbs[0], nbs, mode, drive, rcoup, k2)
            for q in range(6):
                w[q] = u[q] + hh * k2[q]
            _f_pair(w, r0m, r0s, &cm[0], &cs[0], &bpm[0], &slm[0], &gbm[0], nbm,
                    &bps[0], &sls[0], &gbs[0], nbs, mode, drive, rcoup, k3)
            for q in range(6):
                w[q] = u[q] + dt * k3[q]
            _f_pair(w, r0m, r0s, &cm[0], &cs[0], &bpm[0], &slm[0], &gbm[0], nbm,
                    &bps[0], &sls[0], &gbs[0], nbs, mode, drive, rcoup, k4)
            for q in range(6):
                u[q] = u[q] + h6 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q])
            if mode == 1:
                u[3 + drive] = u[drive]
            if _bad(u, 6, limit):
                bad = j + 1
                break
            if (j + 1) % rec_every == 0:
                for q in range(6):
                    out[pos, q] = u[q]
                pos += 1
    for q in range(6):
        state[q] = u[q]
    return pos, bad


cdef inline double _interp(const double* a, long n, double x) noexcept nogil:
    cdef long i
    cdef double f
    if x <= 0.0:
        return a[0]
    if x >= n - 1:
        return a[n - 1]
    i = <long>x
    f = x - i
    return a[i] + f * (a[i + 1] - a[i])


cdef inline void _f_tx(double x, double y, double z, double s, double r0,
                       double c1, double c2, double l,
                       const double* bp, const double* sl, const double* gb, int nb,
                       double* d) noexcept nogil:
    d[0] = ((y - x) / r0 - _g(x, bp, sl, gb, nb)) / c1
    d[1] = ((s - y) / r0 + z) / c2
    d[2] = -y / l


def transmit(double[::1] state, long nsteps, double dt, double[::1] cc, double r0,
             double[::1] bp, double[::1] sl, double[::1] gb, int nb,
             double[::1] msg, double msg_dt,
             double[::1] chan_out, double[::1] drive_out, double limit):
    """Masking transmitter: channel s = v_c1 + m(t) also drives its own C2 node.

    ``m`` is linearly interpolated from ``msg`` (spacing ``msg_dt``).
    Writes s and v_c1 at every step boundary (nsteps + 1 values). Returns
    the bad step or -1.
    """
    cdef double u[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double hh = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef double c1 = cc[0], c2 = cc[1], l = cc[2]
    cdef double x, y, z, t, ma, mb, mc
    cdef long i, bad = -1
    cdef long nm = msg.shape[0]
    u[0] = state[0]; u[1] = state[1]; u[2] = state[2]
    with nogil:
        ma = _interp(&msg[0], nm, 0.0)
        chan_out[0] = u[0] + ma
        drive_out[0] = u[0]
        for i in range(nsteps):
            t = i * dt
            ma = _interp(&msg[0], nm, t / msg_dt)
            mb = _interp(&msg[0], nm, (t + hh) / msg_dt)
            mc = _interp(&msg[0], nm, (t + dt) / msg_dt)
            x = u[0]; y = u[1]; z = u[2]
            _f_tx(x, y, z, x + ma, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k1)
            _f_tx(x + hh * k1[0], y + hh * k1[1], z + hh * k1[2], x + hh * k1[0] + mb,
                  r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k2)
            _f_tx(x + hh * k2[0], y + hh * k2[1], z + hh * k2[2], x + hh * k2[0] + mb,
                  r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k3)
            _f_tx(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], x + dt * k3[0] + mc,
                  r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k4)
            u[0] = x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            u[1] = y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            u[2] = z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            if _bad(u, 3, limit):
                bad = i + 1
                break
            chan_out[i + 1] = u[0] + _interp(&msg[0], nm, (i + 1) * dt / msg_dt)
            drive_out[i + 1] = u[0]
    state[0] = u[0]; state[1] = u[1]; state[2] = u[2]
    return bad


def receive(double[::1] state, long nsteps, double dt, double[::1] cc, double r0,
            double[::1] bp, double[::1] sl, double[::1] gb, int nb,
            double[::1] chan, long k_sync, double[::1] regen_out, double limit):
    """Masking receiver driven by channel samples at step spacing.

    Before step ``k_sync`` the receiver runs free. Afterwards its C2 node sees
    the channel (mid-step value = mean of the two neighbouring samples) and
    v_c1 is regenerated from its own equation. Writes the regenerated v_c1
    at every step boundary. Returns the bad step or -1.
    """
    cdef double u[3]
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double hh = 0.5 * dt
    cdef double h6 = dt / 6.0
    cdef double c1 = cc[0], c2 = cc[1], l = cc[2]
    cdef double x, y, z, sa, sb, sc
    cdef long i, bad = -1
    u[0] = state[0]; u[1] = state[1]; u[2] = state[2]
    with nogil:
        regen_out[0] = u[0]
        for i in range(nsteps):
            x = u[0]; y = u[1]; z = u[2]
            if i < k_sync:
                _rk4(u, dt, r0, r0, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb)
            else:
                sa = chan[i]
                sc = chan[i + 1]
                sb = 0.5 * (sa + sc)
                _f_tx(x, y, z, sa, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k1)
                _f_tx(x + hh * k1[0], y + hh * k1[1], z + hh * k1[2], sb,
                      r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k2)
                _f_tx(x + hh * k2[0], y + hh * k2[1], z + hh * k2[2], sb,
                      r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k3)
                _f_tx(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], sc,
                      r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb, k4)
                u[0] = x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                u[1] = y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                u[2] = z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            if _bad(u, 3, limit):
                bad = i + 1
                break
            regen_out[i + 1] = u[0]
    state[0] = u[0]; state[1] = u[1]; state[2] = u[2]
    return bad


def lyapunov(double[::1] state, double dt, long n_transient, long n_tau, long n_intervals,
             double d0, double[::1] cc, double r0,
             double[::1] bp, double[::1] sl, double[::1] gb, int nb,
             double z0, double limit):
    """Two-trajectory (Benettin) estimate of the largest exponent.

    Separation is measured as the Euclidean norm of (dv_c1, dv_c2, z0*di_l).
    Returns ``(sum of log(d/d0), bad_step)``; ``state`` ends at the fiducial.
    """
    cdef double u[3]
    cdef double p[3]
    cdef double c1 = cc[0], c2 = cc[1], l = cc[2]
    cdef double acc = 0.0, dx, dy, dz, d, f
    cdef long i, k, bad = -1
    u[0] = state[0]; u[1] = state[1]; u[2] = state[2]
    with nogil:
        for i in range(n_transient):
            _rk4(u, dt, r0, r0, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb)
            if _bad(u, 3, limit):
                bad = i + 1
                break
        if bad < 0:
            p[0] = u[0] + d0; p[1] = u[1]; p[2] = u[2]
            for k in range(n_intervals):
                for i in range(n_tau):
                    _rk4(u, dt, r0, r0, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb)
                    _rk4(p, dt, r0, r0, r0, c1, c2, l, &bp[0], &sl[0], &gb[0], nb)
                if _bad(u, 3, limit) or _bad(p, 3, limit):
                    bad = n_transient + (k + 1) * n_tau
                    break
                dx = p[0] - u[0]
                dy = p[1] - u[1]
                dz = (p[2] - u[2]) * z0
                d = sqrt(dx * dx + dy * dy + dz * dz)
                if d == 0.0:
                    # collapsed onto the fiducial; restart the offset
                    acc += log(1e-300 / d0)
                    p[0] = u[0] + d0; p[1] = u[1]; p[2] = u[2]
                    continue
                acc += log(d / d0)
                f = d0 / d
                p[0] = u[0] + dx * f
                p[1] = u[1] + dy * f
                p[2] = u[2] + (p[2] - u[2]) * f
    state[0] = u[0]; state[1] = u[1]; state[2] = u[2]
    return acc, bad
