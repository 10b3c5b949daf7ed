"""Compiled inner loops for the value-iteration solvers.

All sweeps are synchronous: each pass computes V_{n+1} entirely from V_n (the
periodic pass reads only the continuation slice, never the slice it writes).
Loop order is fixed, giving bitwise deterministic results.
"""

import numba


@numba.njit("f8(f8[::1], f8[:, :, ::1], i4[:, :, ::1], f8[:, ::1], f8[:, ::1], "
            "b1[:, ::1], i8[::1], f8[::1], i4[::1])", cache=True)
def bellman_max_sweep(v, probs, targets, beta, rdt, adm, pref, vout, pol):
    """One Bellman application with argmax; returns the sup-norm change.

    ``pref`` lists control indices in tie-break order (smallest |u|, then
    smallest u); the strictly-greater update makes the first maximizer in that
    order win.
    """
    nrows, nu, nslots = probs.shape
    dmax = 0.0
    for r in range(nrows):
        best = -1e300
        bestj = -1
        for a in range(nu):
            j = pref[a]
            if not adm[r, j]:
                continue
            acc = 0.0
            for q in range(nslots):
                acc += probs[r, j, q] * v[targets[r, j, q]]
            val = rdt[r, j] + beta[r, j] * acc
            if val > best:
                best = val
                bestj = j
        vout[r] = best
        pol[r] = bestj
        d = abs(best - v[r])
        if d > dmax:
            dmax = d
    return dmax


@numba.njit(numba.types.Tuple((numba.float64, numba.int64))(
    numba.float64[::1], numba.float64[:, :, ::1], numba.int32[:, :, ::1],
    numba.float64[:, ::1], numba.float64[:, ::1], numba.int32[::1],
    numba.float64[::1], numba.int64, numba.float64), cache=True)
def frozen_policy_block(v, probs, targets, beta, rdt, pol, vbuf, kmax,
                        breaktol):
    """Up to ``kmax`` frozen-policy sweeps; leaves the result in ``v``.

    Stops early once a sweep moves the value by less than ``breaktol``.
    Returns (last sup change, sweeps done).
    """
    nrows = probs.shape[0]
    nslots = probs.shape[2]
    done = 0
    d = 0.0
    for it in range(kmax):
        if it % 2 == 0:
            src, dst = v, vbuf
        else:
            src, dst = vbuf, v
        d = 0.0
        for r in range(nrows):
            j = pol[r]
            acc = 0.0
            for q in range(nslots):
                acc += probs[r, j, q] * src[targets[r, j, q]]
            val = rdt[r, j] + beta[r, j] * acc
            dst[r] = val
            dd = abs(val - src[r])
            if dd > d:
                d = dd
        done += 1
        if d < breaktol:
            break
    if done % 2 == 1:
        v[:] = vbuf
    return d, done


@numba.njit("f8(f8[:, :, ::1], f8[:, :, ::1], f8[:, :, ::1], f8[:, :, :, ::1], "
            "f8[:, ::1], b1[:, :, ::1], i8[::1], f8[::1], f8, f8, f8, "
            "i4[:, :, ::1], b1)", cache=True)
def periodic_backward_sweep(w, b, sig2, rdt, rates, adm0, pref, u, beta,
                            h1, h2, pol, write_policy):
    """One backward pass over the period, in place; returns the slice-0 change.

    Slices are updated from gamma = T - h1 down to 0, so each slice reads the
    continuation slice already updated in this pass, except the last slice,
    which reads slice 0 from the previous pass (periodic closure W(T) = W(0)).
    Transition probabilities are formed on the fly from the coefficient
    tables; dt = h1 and the discount per step is the scalar ``beta``.
    """
    n1, nx, m0 = w.shape
    nu = u.size
    c = h1 / (h2 * h2)
    w0_old = w[0].copy()
    for s in range(n1 - 1, -1, -1):
        snext = s + 1 if s + 1 < n1 else 0
        for i in range(nx):
            for k in range(m0):
                best = -1e300
                bestj = -1
                for a in range(nu):
                    j = pref[a]
                    if i == 0 and not adm0[s, k, j]:
                        continue
                    bu = b[s, i, k] - u[j]
                    half = sig2[s, i, k] / 2.0
                    pup = (half + max(bu, 0.0) * h2) * c
                    pdn = (half + max(-bu, 0.0) * h2) * c
                    acc = 0.0
                    if i < nx - 1:
                        acc += pup * w[snext, i + 1, k]
                    else:
                        acc += pup * w[snext, i, k]       # reflected at x = B
                    if i > 0:
                        acc += pdn * w[snext, i - 1, k]
                    psw = 0.0
                    for l in range(m0):
                        if l != k:
                            p = h1 * rates[k, l]
                            acc += p * w[snext, i, l]
                            psw += p
                    acc += (1.0 - pup - pdn - psw) * w[snext, i, k]
                    val = rdt[s, i, k, j] + beta * acc
                    if val > best:
                        best = val
                        bestj = j
                w[s, i, k] = best
                if write_policy:
                    pol[s, i, k] = bestj
    d0 = 0.0
    for i in range(nx):
        for k in range(m0):
            d = abs(w[0, i, k] - w0_old[i, k])
            if d > d0:
                d0 = d
    return d0
