"""
Compiled inner loops of the replica-exchange sampler.

State lives in "slots"; ``perm[l]`` is the slot currently held by
temperature ``l``, so an exchange only swaps two integers. Per slot the
kernels cache the peak shapes ``phi`` (K, M), the raw rate ``f`` (M) and the
per-point log-likelihood terms ``ll`` (M). A proposal touches only points
whose rate actually changes in floating point.

All random numbers are drawn outside (per-replica numpy streams) and passed
in, which keeps runs bit-reproducible.
"""

import math

import numpy as np
from numba import njit

# exp(-745.2) underflows to 0.0 in double precision
_EXP_CUTOFF = 745.2


@njit(cache=True)
def log_prior_1d(code, args, v):
    if code == 0:  # beta
        if not (0.0 < v < 1.0):
            return -np.inf
        return (args[0] - 1.0) * math.log(v) + (args[1] - 1.0) * math.log1p(-v) - args[2]
    elif code == 1:  # gamma(shape, rate)
        if not v > 0.0:
            return -np.inf
        return args[2] + (args[0] - 1.0) * math.log(v) - args[1] * v
    elif code == 2:  # uniform
        if not (args[0] <= v <= args[1]):
            return -np.inf
        return args[2]
    elif code == 3:  # gamma on 1/sigma^2, density of sigma
        if not v > 0.0:
            return -np.inf
        tau = 1.0 / (v * v)
        return args[2] + (args[0] - 1.0) * math.log(tau) - args[1] * tau - 3.0 * math.log(v)
    else:  # gaussian
        z = (v - args[0]) / args[1]
        return args[2] - 0.5 * z * z


@njit(cache=True)
def _point_ll(fi, n, m, eps):
    p = fi
    if p < eps:
        p = eps
    elif p > 1.0 - eps:
        p = 1.0 - eps
    out = 0.0
    if n > 0:
        out += n * math.log(p)
    if m > 0:
        out += m * math.log1p(-p)
    return out


@njit(cache=True)
def _basis(x, mu, sigma):
    z = (x - mu) / sigma
    e = 0.5 * z * z
    if e > _EXP_CUTOFF:
        return 0.0
    return math.exp(-e)


@njit(cache=True)
def refresh_slot(theta, phi, f, ll, x, n, N, eps):
    """Recompute every cached quantity of one slot from its parameters.

    Returns the summed log-likelihood terms.
    """
    P = theta.shape[0]
    K = (P - 1) // 3
    M = x.shape[0]
    B = theta[P - 1]
    total = 0.0
    for i in range(M):
        f[i] = B
    for k in range(K):
        a = theta[3 * k]
        mu = theta[3 * k + 1]
        sig = theta[3 * k + 2]
        for i in range(M):
            ph = _basis(x[i], mu, sig)
            phi[k, i] = ph
            f[i] += a * ph
    for i in range(M):
        ll[i] = _point_ll(f[i], n[i], N[i] - n[i], eps)
        total += ll[i]
    return total


@njit(cache=True)
def _propose(s, j, new, theta, phi, f, ll, x, n, N, eps, fnew, llnew, phinew):
    """Fill the scratch arrays for ``theta[s, j] = new``; return the change in log-likelihood."""
    P = theta.shape[1]
    M = x.shape[0]
    dll = 0.0
    if j == P - 1:
        d = new - theta[s, j]
        for i in range(M):
            fn = f[s, i] + d
            fnew[i] = fn
            if fn == f[s, i]:
                llnew[i] = ll[s, i]
            else:
                llnew[i] = _point_ll(fn, n[i], N[i] - n[i], eps)
                dll += llnew[i] - ll[s, i]
        return dll
    k = j // 3
    kind = j - 3 * k
    if kind == 0:
        d = new - theta[s, j]
        for i in range(M):
            ph = phi[s, k, i]
            fn = f[s, i] + d * ph
            fnew[i] = fn
            if fn == f[s, i]:
                llnew[i] = ll[s, i]
            else:
                llnew[i] = _point_ll(fn, n[i], N[i] - n[i], eps)
                dll += llnew[i] - ll[s, i]
        return dll
    a = theta[s, 3 * k]
    if kind == 1:
        mu = new
        sig = theta[s, 3 * k + 2]
    else:
        mu = theta[s, 3 * k + 1]
        sig = new
    for i in range(M):
        ph = _basis(x[i], mu, sig)
        phinew[i] = ph
        fn = f[s, i] + a * (ph - phi[s, k, i])
        fnew[i] = fn
        if fn == f[s, i]:
            llnew[i] = ll[s, i]
        else:
            llnew[i] = _point_ll(fn, n[i], N[i] - n[i], eps)
            dll += llnew[i] - ll[s, i]
    return dll


@njit(cache=True)
def _commit(s, j, new, theta, phi, f, ll, fnew, llnew, phinew):
    P = theta.shape[1]
    M = f.shape[1]
    theta[s, j] = new
    for i in range(M):
        f[s, i] = fnew[i]
        ll[s, i] = llnew[i]
    if j != P - 1:
        k = j // 3
        if j - 3 * k != 0:
            for i in range(M):
                phi[s, k, i] = phinew[i]


@njit(cache=True)
def sweep_replica(l, theta, phi, f, ll, llsum, perm, x, n, N, betas, steps, codes, pargs,
                  normals, unifs, eps, accepts, fnew, llnew, phinew):
    """One Metropolis pass over every parameter of temperature ``l``."""
    s = perm[l]
    beta = betas[l]
    P = theta.shape[1]
    for j in range(P):
        old = theta[s, j]
        new = old + steps[l, j] * normals[l, j]
        lp_new = log_prior_1d(codes[j], pargs[j], new)
        if lp_new == -np.inf:
            continue
        lp_old = log_prior_1d(codes[j], pargs[j], old)
        log_u = math.log(unifs[l, j]) if unifs[l, j] > 0.0 else -np.inf
        if beta == 0.0:
            if log_u < lp_new - lp_old:
                dll = _propose(s, j, new, theta, phi, f, ll, x, n, N, eps, fnew, llnew, phinew)
                _commit(s, j, new, theta, phi, f, ll, fnew, llnew, phinew)
                llsum[s] += dll
                accepts[l, j] += 1
            continue
        dll = _propose(s, j, new, theta, phi, f, ll, x, n, N, eps, fnew, llnew, phinew)
        if log_u < beta * dll + lp_new - lp_old:
            _commit(s, j, new, theta, phi, f, ll, fnew, llnew, phinew)
            llsum[s] += dll
            accepts[l, j] += 1


@njit(cache=True)
def exchange_pass(llsum, perm, betas, swap_u, logc_sum, M, attempts, accepted):
    """Sequential adjacent swaps l = 0 .. L-2, each with probability min(1, v)."""
    L = betas.shape[0]
    for l in range(L - 1):
        sa = perm[l]
        sb = perm[l + 1]
        e_a = -(llsum[sa] + logc_sum) / M
        e_b = -(llsum[sb] + logc_sum) / M
        log_v = M * (betas[l + 1] - betas[l]) * (e_b - e_a)
        attempts[l] += 1
        u = swap_u[l]
        if u <= 0.0 or math.log(u) < log_v:
            perm[l] = sb
            perm[l + 1] = sa
            accepted[l] += 1


@njit(cache=True)
def advance(theta, phi, f, ll, llsum, perm, x, n, N, betas, steps, codes, pargs,
            normals, unifs, swap_u, eps, logc_sum, accepts, swap_att, swap_acc,
            do_exchange, record_row, rec_theta, rec_energy, record_all):
    """Run ``normals.shape[0]`` iterations of sweep + exchange.

    ``record_row[t] >= 0`` stores the state after iteration ``t`` in that
    row of ``rec_theta``/``rec_energy``. With ``record_all`` false only the
    last (beta = 1) temperature's parameters are stored.
    """
    T = normals.shape[0]
    L = betas.shape[0]
    P = theta.shape[1]
    M = x.shape[0]
    fnew = np.empty(M)
    llnew = np.empty(M)
    phinew = np.empty(M)
    for t in range(T):
        for l in range(L):
            sweep_replica(l, theta, phi, f, ll, llsum, perm, x, n, N, betas, steps, codes, pargs,
                          normals[t], unifs[t], eps, accepts, fnew, llnew, phinew)
        if do_exchange and L > 1:
            exchange_pass(llsum, perm, betas, swap_u[t], logc_sum, M, swap_att, swap_acc)
        r = record_row[t]
        if r >= 0:
            for l in range(L):
                s = perm[l]
                rec_energy[r, l] = -(llsum[s] + logc_sum) / M
                if record_all:
                    for j in range(P):
                        rec_theta[r, l, j] = theta[s, j]
                elif l == L - 1:
                    for j in range(P):
                        rec_theta[r, 0, j] = theta[s, j]
