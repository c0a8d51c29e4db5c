"""Pure-Python twins of the compiled kernels in ``_core.pyx``.

Same signatures, same floating-point operation order; used when the
extension is not built (or ``CHUALAB_PURE_PYTHON=1``). Roughly two orders of
magnitude slower.
"""

from math import log, sin, sqrt


def _g(v, bp, sl, gb, nb):
    a = abs(v)
    k = 0
    while k < nb and a > bp[k]:
        k += 1
    if k == 0:
        r = sl[0] * a
    else:
        r = gb[k - 1] + sl[k] * (a - bp[k - 1])
    if v >= 0:
        return r
    return -r


def _rk4(x, y, z, dt, ra, rb, rc, c1, c2, l, bp, sl, gb, nb):
    hh = 0.5 * dt
    h6 = dt / 6.0
    a1 = ((y - x) / ra - _g(x, bp, sl, gb, nb)) / c1
    b1 = ((x - y) / ra + z) / c2
    e1 = -y / l
    x2 = x + hh * a1
    y2 = y + hh * b1
    z2 = z + hh * e1
    a2 = ((y2 - x2) / rb - _g(x2, bp, sl, gb, nb)) / c1
    b2 = ((x2 - y2) / rb + z2) / c2
    e2 = -y2 / l
    x3 = x + hh * a2
    y3 = y + hh * b2
    z3 = z + hh * e2
    a3 = ((y3 - x3) / rb - _g(x3, bp, sl, gb, nb)) / c1
    b3 = ((x3 - y3) / rb + z3) / c2
    e3 = -y3 / l
    x4 = x + dt * a3
    y4 = y + dt * b3
    z4 = z + dt * e3
    a4 = ((y4 - x4) / rc - _g(x4, bp, sl, gb, nb)) / c1
    b4 = ((x4 - y4) / rc + z4) / c2
    e4 = -y4 / l
    return (
        x + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        y + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
        z + h6 * (e1 + 2.0 * e2 + 2.0 * e3 + e4),
    )


def _bad(u, limit):
    for v in u:
        if not (abs(v) <= limit):
            return True
    return False


def integrate(state, k0, nsteps, dt, cc, r0c, r0d, r0w, bp, sl, gb, nb,
              rec_every, out, pos, limit):
    c1, c2, l = float(cc[0]), float(cc[1]), float(cc[2])
    bp, sl, gb = [float(v) for v in bp], [float(v) for v in sl], [float(v) for v in gb]
    x, y, z = float(state[0]), float(state[1]), float(state[2])
    varying = r0d != 0.0
    ra = rb = rc = r0c
    bad = -1
    rows = []
    for i in range(nsteps):
        j = k0 + i
        if varying:
            t = j * dt
            ra = r0c + r0d * sin(r0w * t)
            rb = r0c + r0d * sin(r0w * (t + 0.5 * dt))
            rc = r0c + r0d * sin(r0w * (t + dt))
        x, y, z = _rk4(x, y, z, dt, ra, rb, rc, c1, c2, l, bp, sl, gb, nb)
        if _bad((x, y, z), limit):
            bad = j + 1
            break
        if (j + 1) % rec_every == 0:
            rows.append((x, y, z))
    if rows:
        out[pos:pos + len(rows)] = rows
        pos += len(rows)
    state[0], state[1], state[2] = x, y, z
    return pos, bad


def _f3(x, y, z, r0, c, bp, sl, gb, nb):
    return [
        ((y - x) / r0 - _g(x, bp, sl, gb, nb)) / c[0],
        ((x - y) / r0 + z) / c[1],
        -y / c[2],
    ]


def _f_pair(u, r0m, r0s, cm, cs, dm, ds, mode, drive, rcoup):
    d = _f3(u[0], u[1], u[2], r0m, cm, *dm)
    v = [u[3], u[4], u[5]]
    if mode == 1:
        v[drive] = u[drive]
    e = _f3(v[0], v[1], v[2], r0s, cs, *ds)
    if mode == 1:
        e[drive] = d[drive]
    elif mode == 2:
        e[drive] = e[drive] + (u[drive] - v[drive]) / rcoup / cs[drive]
    return d + e


def integrate_pair(state, k0, nsteps, dt, cm, r0m, cs, r0s,
                   bpm, slm, gbm, nbm, bps, sls, gbs, nbs,
                   mode, drive, rcoup, rec_every, out, pos, limit):
    cm = [float(v) for v in cm]
    cs = [float(v) for v in cs]
    dm = ([float(v) for v in bpm], [float(v) for v in slm], [float(v) for v in gbm], nbm)
    ds = ([float(v) for v in bps], [float(v) for v in sls], [float(v) for v in gbs], nbs)
    hh = 0.5 * dt
    h6 = dt / 6.0
    u = [float(v) for v in state]
    bad = -1
    rows = []
    for i in range(nsteps):
        j = k0 + i
        k1 = _f_pair(u, r0m, r0s, cm, cs, dm, ds, mode, drive, rcoup)
        k2 = _f_pair([u[q] + hh * k1[q] for q in range(6)], r0m, r0s, cm, cs, dm, ds, mode, drive, rcoup)
        k3 = _f_pair([u[q] + hh * k2[q] for q in range(6)], r0m, r0s, cm, cs, dm, ds, mode, drive, rcoup)
        k4 = _f_pair([u[q] + dt * k3[q] for q in range(6)], r0m, r0s, cm, cs, dm, ds, mode, drive, rcoup)
        u = [u[q] + h6 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]) for q in range(6)]
        if mode == 1:
            u[3 + drive] = u[drive]
        if _bad(u, limit):
            bad = j + 1
            break
        if (j + 1) % rec_every == 0:
            rows.append(tuple(u))
    if rows:
        out[pos:pos + len(rows)] = rows
        pos += len(rows)
    state[:] = u
    return pos, bad


def _interp(a, n, x):
    if x <= 0.0:
        return a[0]
    if x >= n - 1:
        return a[n - 1]
    i = int(x)
    f = x - i
    return a[i] + f * (a[i + 1] - a[i])


def _f_tx(x, y, z, s, r0, c1, c2, l, bp, sl, gb, nb):
    return (
        ((y - x) / r0 - _g(x, bp, sl, gb, nb)) / c1,
        ((s - y) / r0 + z) / c2,
        -y / l,
    )


def transmit(state, nsteps, dt, cc, r0, bp, sl, gb, nb, msg, msg_dt, chan_out, drive_out, limit):
    c1, c2, l = float(cc[0]), float(cc[1]), float(cc[2])
    D = ([float(v) for v in bp], [float(v) for v in sl], [float(v) for v in gb], nb)
    msg = [float(v) for v in msg]
    nm = len(msg)
    hh = 0.5 * dt
    h6 = dt / 6.0
    x, y, z = float(state[0]), float(state[1]), float(state[2])
    bad = -1
    chan = [x + _interp(msg, nm, 0.0)]
    drv = [x]
    for i in range(nsteps):
        t = i * dt
        ma = _interp(msg, nm, t / msg_dt)
        mb = _interp(msg, nm, (t + hh) / msg_dt)
        mc = _interp(msg, nm, (t + dt) / msg_dt)
        k1 = _f_tx(x, y, z, x + ma, r0, c1, c2, l, *D)
        k2 = _f_tx(x + hh * k1[0], y + hh * k1[1], z + hh * k1[2], x + hh * k1[0] + mb, r0, c1, c2, l, *D)
        k3 = _f_tx(x + hh * k2[0], y + hh * k2[1], z + hh * k2[2], x + hh * k2[0] + mb, r0, c1, c2, l, *D)
        k4 = _f_tx(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], x + dt * k3[0] + mc, r0, c1, c2, l, *D)
        x, y, z = (
            x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        )
        if _bad((x, y, z), limit):
            bad = i + 1
            break
        chan.append(x + _interp(msg, nm, (i + 1) * dt / msg_dt))
        drv.append(x)
    chan_out[:len(chan)] = chan
    drive_out[:len(drv)] = drv
    state[0], state[1], state[2] = x, y, z
    return bad


def receive(state, nsteps, dt, cc, r0, bp, sl, gb, nb, chan, k_sync, regen_out, limit):
    c1, c2, l = float(cc[0]), float(cc[1]), float(cc[2])
    D = ([float(v) for v in bp], [float(v) for v in sl], [float(v) for v in gb], nb)
    hh = 0.5 * dt
    h6 = dt / 6.0
    x, y, z = float(state[0]), float(state[1]), float(state[2])
    bad = -1
    regen = [x]
    for i in range(nsteps):
        if i < k_sync:
            x, y, z = _rk4(x, y, z, dt, r0, r0, r0, c1, c2, l, *D)
        else:
            sa = float(chan[i])
            sc = float(chan[i + 1])
            sb = 0.5 * (sa + sc)
            k1 = _f_tx(x, y, z, sa, r0, c1, c2, l, *D)
            k2 = _f_tx(x + hh * k1[0], y + hh * k1[1], z + hh * k1[2], sb, r0, c1, c2, l, *D)
            k3 = _f_tx(x + hh * k2[0], y + hh * k2[1], z + hh * k2[2], sb, r0, c1, c2, l, *D)
            k4 = _f_tx(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], sc, r0, c1, c2, l, *D)
            x, y, z = (
                x + h6 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y + h6 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                z + h6 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
            )
        if _bad((x, y, z), limit):
            bad = i + 1
            break
        regen.append(x)
    regen_out[:len(regen)] = regen
    state[0], state[1], state[2] = x, y, z
    return bad


def lyapunov(state, dt, n_transient, n_tau, n_intervals, d0, cc, r0, bp, sl, gb, nb, z0, limit):
    c1, c2, l = float(cc[0]), float(cc[1]), float(cc[2])
    D = ([float(v) for v in bp], [float(v) for v in sl], [float(v) for v in gb], nb)
    x, y, z = float(state[0]), float(state[1]), float(state[2])
    acc = 0.0
    bad = -1
    for i in range(n_transient):
        x, y, z = _rk4(x, y, z, dt, r0, r0, r0, c1, c2, l, *D)
        if _bad((x, y, z), limit):
            bad = i + 1
            break
    if bad < 0:
        px, py, pz = x + d0, y, z
        for k in range(n_intervals):
            for i in range(n_tau):
                x, y, z = _rk4(x, y, z, dt, r0, r0, r0, c1, c2, l, *D)
                px, py, pz = _rk4(px, py, pz, dt, r0, r0, r0, c1, c2, l, *D)
            if _bad((x, y, z), limit) or _bad((px, py, pz), limit):
                bad = n_transient + (k + 1) * n_tau
                break
            dx = px - x
            dy = py - y
            dz = (pz - z) * z0
            d = sqrt(dx * dx + dy * dy + dz * dz)
            if d == 0.0:
                acc += log(1e-300 / d0)
                px, py, pz = x + d0, y, z
                continue
            acc += log(d / d0)
            f = d0 / d
            px = x + dx * f
            py = y + dy * f
            pz = z + (pz - z) * f
    state[0], state[1], state[2] = x, y, z
    return acc, bad
