"""
Method of moving asymptotes, 2007 formulation
One mma_update call builds the convex separable approximation around the current design and
solves it with a primal-dual interior point method.

    minimize    f_0(x) + a0 z + sum(c_i y_i + 0.5 d_i y_i^2)
    subject to  f_i(x) - a_i z - y_i <= 0,   i = 1..m
                xmin_j <= x_j <= xmax_j,   z >= 0,   y_i >= 0

Vectors are columns internally, the public functions take and return flat arrays.
"""

import numpy as np
import scipy.linalg

from essentials import SolverError

__version__ = "0.1.1"

EPSIMIN = 1e-7
RAA0 = 1e-5
ALBEFA = 0.1
ASYINIT = 0.5
ASYINCR = 1.2
ASYDECR = 0.7
# asymptote distance limits, in units of (xmax - xmin)
LOWMIN_FACTOR = 10.0
LOWMAX_FACTOR = 0.01

SUBSOLV_MAX_NEWTON = 200
SUBSOLV_MAX_LINESEARCH = 50


class MmaOptions:
    __slots__ = ('m', 'n', 'xmin', 'xmax', 'a0', 'a', 'c', 'd', 'move',
                 'asyinit', 'asyincr', 'asydecr', 'albefa')

    def __init__(self, n, m=1, xmin=0.0, xmax=1.0, a0=1.0, a=0.0, c=1e4, d=0.0, move=0.5,
                 asyinit=ASYINIT, asyincr=ASYINCR, asydecr=ASYDECR, albefa=ALBEFA):
        self.m = int(m)
        self.n = int(n)
        self.xmin = np.broadcast_to(np.asarray(xmin, dtype=float), (self.n,)).reshape(-1, 1).copy()
        self.xmax = np.broadcast_to(np.asarray(xmax, dtype=float), (self.n,)).reshape(-1, 1).copy()
        if np.any(self.xmin >= self.xmax):
            raise ValueError("Need xmin < xmax for every variable")
        self.a0 = float(a0)
        self.a = np.broadcast_to(np.asarray(a, dtype=float), (self.m,)).reshape(-1, 1).copy()
        self.c = np.broadcast_to(np.asarray(c, dtype=float), (self.m,)).reshape(-1, 1).copy()
        self.d = np.broadcast_to(np.asarray(d, dtype=float), (self.m,)).reshape(-1, 1).copy()
        if np.any(self.c <= 0):
            raise ValueError("MMA constants c must be positive")
        if not 0 < move <= 1:
            raise ValueError(f"MMA move must lie in (0, 1], got {move}")
        self.move = float(move)
        self.asyinit = asyinit
        self.asyincr = asyincr
        self.asydecr = asydecr
        self.albefa = albefa


class MmaState:
    """Iterates and asymptotes carried between MMA iterations."""

    __slots__ = ('x', 'xold1', 'xold2', 'low', 'upp', 'iteration', 'kkt_residual', 'alfa', 'beta', 'multipliers')

    def __init__(self, x0, opts):
        x0 = np.asarray(x0, dtype=float).reshape(-1, 1)
        self.x = x0.copy()
        self.xold1 = x0.copy()
        self.xold2 = x0.copy()
        self.low = opts.xmin.copy()
        self.upp = opts.xmax.copy()
        self.iteration = 0
        self.kkt_residual = None
        self.alfa = opts.xmin.copy()
        self.beta = opts.xmax.copy()
        # y, z, lam, xsi, eta, mu, zet, s of the last subproblem
        self.multipliers = None


def _col(values, rows):
    return np.asarray(values, dtype=float).reshape(rows, -1)


def mma_update(state, opts, f0val, df0dx, fval, dfdx):
    """One MMA iteration at state.x. Updates state in place and returns the new design as a flat array.

    df0dx: (n,), fval: (m,), dfdx: (m, n).
    """
    n, m = opts.n, opts.m
    df0dx = _col(df0dx, n)
    fval = _col(fval, m)
    dfdx = np.asarray(dfdx, dtype=float).reshape(m, n)
    if not np.all(np.isfinite(df0dx)) or not np.all(np.isfinite(dfdx)) or not np.all(np.isfinite(fval)):
        raise ValueError("MMA received non finite function values or gradients")
    state.iteration += 1
    xval, xmin, xmax = state.x, opts.xmin, opts.xmax
    span = xmax - xmin

    # asymptotes
    if state.iteration <= 2:
        low = xval - opts.asyinit * span
        upp = xval + opts.asyinit * span
    else:
        oscillation = (xval - state.xold1) * (state.xold1 - state.xold2)
        factor = np.ones((n, 1))
        factor[oscillation > 0] = opts.asyincr
        factor[oscillation < 0] = opts.asydecr
        low = xval - factor * (state.xold1 - state.low)
        upp = xval + factor * (state.upp - state.xold1)
        low = np.minimum(np.maximum(low, xval - LOWMIN_FACTOR * span), xval - LOWMAX_FACTOR * span)
        upp = np.maximum(np.minimum(upp, xval + LOWMIN_FACTOR * span), xval + LOWMAX_FACTOR * span)

    # move bounds alfa, beta
    alfa = np.maximum(np.maximum(low + opts.albefa * (xval - low), xval - opts.move * span), xmin)
    beta = np.minimum(np.minimum(upp - opts.albefa * (upp - xval), xval + opts.move * span), xmax)

    # p0, q0, P, Q, b of the convex approximation
    xmamiinv = 1.0 / np.maximum(span, 1e-5)
    ux2 = (upp - xval) ** 2
    xl2 = (xval - low) ** 2
    p0 = np.maximum(df0dx, 0)
    q0 = np.maximum(-df0dx, 0)
    pq0 = 0.001 * (p0 + q0) + RAA0 * xmamiinv
    p0 = (p0 + pq0) * ux2
    q0 = (q0 + pq0) * xl2
    P = np.maximum(dfdx, 0)
    Q = np.maximum(-dfdx, 0)
    PQ = 0.001 * (P + Q) + RAA0 * xmamiinv.T
    P = (P + PQ) * ux2.T
    Q = (Q + PQ) * xl2.T
    b = P @ (1.0 / (upp - xval)) + Q @ (1.0 / (xval - low)) - fval

    solution = subsolv(m, n, EPSIMIN, low, upp, alfa, beta, p0, q0, P, Q, opts.a0, opts.a, b, opts.c, opts.d)
    xmma = solution[0]

    state.xold2, state.xold1, state.x = state.xold1, state.x, xmma
    state.low, state.upp = low, upp
    state.alfa, state.beta = alfa, beta
    state.kkt_residual = solution[-1]
    state.multipliers = solution[1:-1]
    return xmma.ravel().copy()


def _residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi, low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d):
    ux1 = upp - x
    xl1 = x - low
    plam = p0 + P.T @ lam
    qlam = q0 + Q.T @ lam
    gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
    rex = plam / ux1 ** 2 - qlam / xl1 ** 2 - xsi + eta
    rey = c + d * y - mu - lam
    rez = a0 - zet - a.T @ lam
    relam = gvec - a * z - y + s - b
    rexsi = xsi * (x - alfa) - epsi
    reeta = eta * (beta - x) - epsi
    remu = mu * y - epsi
    rezet = zet * z - epsi
    res = lam * s - epsi
    return np.concatenate((rex, rey, rez, relam, rexsi, reeta, remu, rezet, res), axis=0)


def subsolv(m, n, epsimin, low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d):
    """Primal-dual Newton solve of the MMA subproblem.

    Returns x, y, z, lam, xsi, eta, mu, zet, s and the final perturbed KKT max residual.
    Raises SolverError when a barrier stage exhausts its Newton steps.
    """
    een = np.ones((n, 1))
    eem = np.ones((m, 1))
    epsi = 1.0
    x = 0.5 * (alfa + beta)
    y = eem.copy()
    z = np.array([[1.0]])
    lam = eem.copy()
    xsi = np.maximum(een / (x - alfa), een)
    eta = np.maximum(een / (beta - x), een)
    mu = np.maximum(eem, 0.5 * c)
    zet = np.array([[1.0]])
    s = eem.copy()
    fixed = (low, upp, alfa, beta, p0, q0, P, Q, a0, a, b, c, d)
    residumax = 0.0

    while epsi > epsimin:
        residu = _residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi, *fixed)
        residunorm = np.linalg.norm(residu)
        residumax = np.max(np.abs(residu))
        newton = 0
        while residumax > 0.9 * epsi:
            if newton >= SUBSOLV_MAX_NEWTON:
                raise SolverError(f"MMA subproblem did not converge in {SUBSOLV_MAX_NEWTON} Newton steps "
                                  f"at barrier {epsi:.1e}", residual=residumax)
            newton += 1
            ux1 = upp - x
            xl1 = x - low
            ux2 = ux1 * ux1
            xl2 = xl1 * xl1
            plam = p0 + P.T @ lam
            qlam = q0 + Q.T @ lam
            gvec = P @ (1.0 / ux1) + Q @ (1.0 / xl1)
            GG = P / ux2.T - Q / xl2.T
            dpsidx = plam / ux2 - qlam / xl2
            delx = dpsidx - epsi / (x - alfa) + epsi / (beta - x)
            dely = c + d * y - lam - epsi / y
            delz = a0 - a.T @ lam - epsi / z
            dellam = gvec - a * z - y - b + epsi / lam
            diagx = 2 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1)) + xsi / (x - alfa) + eta / (beta - x)
            diagy = d + mu / y
            diaglamyi = s / lam + 1.0 / diagy

            if m < n:
                blam = dellam + dely / diagy - GG @ (delx / diagx)
                bb = np.concatenate((blam, delz), axis=0)
                alam = np.diag(diaglamyi.ravel()) + (GG / diagx.T) @ GG.T
                AA = np.block([[alam, a], [a.T, -zet / z]])
                solut = scipy.linalg.solve(AA, bb)
                dlam = solut[:m]
                dz = solut[m:m + 1]
                dx = -delx / diagx - (GG.T @ dlam) / diagx
            else:
                dellamyi = dellam + dely / diagy
                axx = np.diag(diagx.ravel()) + (GG.T / diaglamyi.T) @ GG
                azz = zet / z + a.T @ (a / diaglamyi)
                axz = -GG.T @ (a / diaglamyi)
                bx = delx + GG.T @ (dellamyi / diaglamyi)
                bz = delz - a.T @ (dellamyi / diaglamyi)
                AA = np.block([[axx, axz], [axz.T, azz]])
                solut = scipy.linalg.solve(AA, -np.concatenate((bx, bz), axis=0))
                dx = solut[:n]
                dz = solut[n:n + 1]
                dlam = (GG @ dx) / diaglamyi - dz * (a / diaglamyi) + dellamyi / diaglamyi

            dy = -dely / diagy + dlam / diagy
            dxsi = -xsi + epsi / (x - alfa) - (xsi * dx) / (x - alfa)
            deta = -eta + epsi / (beta - x) + (eta * dx) / (beta - x)
            dmu = -mu + epsi / y - (mu * dy) / y
            dzet = -zet + epsi / z - zet * dz / z
            ds = -s + epsi / lam - (s * dlam) / lam

            # step keeping all positive variables positive
            xx = np.concatenate((y, z, lam, xsi, eta, mu, zet, s), axis=0)
            dxx = np.concatenate((dy, dz, dlam, dxsi, deta, dmu, dzet, ds), axis=0)
            stmxx = np.max(-1.01 * dxx / xx)
            stmalfa = np.max(-1.01 * dx / (x - alfa))
            stmbeta = np.max(1.01 * dx / (beta - x))
            steg = 1.0 / max(stmalfa, stmbeta, stmxx, 1.0)

            old = (x, y, z, lam, xsi, eta, mu, zet, s)
            steps = (dx, dy, dz, dlam, dxsi, deta, dmu, dzet, ds)
            resinew = 2 * residunorm
            linesearch = 0
            while resinew > residunorm and linesearch < SUBSOLV_MAX_LINESEARCH:
                linesearch += 1
                x, y, z, lam, xsi, eta, mu, zet, s = (v + steg * dv for v, dv in zip(old, steps))
                residu = _residual(x, y, z, lam, xsi, eta, mu, zet, s, epsi, *fixed)
                resinew = np.linalg.norm(residu)
                steg = steg / 2
            residunorm = resinew
            residumax = np.max(np.abs(residu))
        epsi = 0.1 * epsi
    return x, y, z, lam, xsi, eta, mu, zet, s, residumax


def kktcheck(x, y, z, lam, xsi, eta, mu, zet, s, xmin, xmax, df0dx, fval, dfdx, a0, a, c, d):
    """Residual of the KKT conditions of the original problem, returns (residu, norm, max)."""
    rex = df0dx + dfdx.T @ lam - xsi + eta
    rey = c + d * y - mu - lam
    rez = a0 - zet - a.T @ lam
    relam = fval - a * z - y + s
    rexsi = xsi * (x - xmin)
    reeta = eta * (xmax - x)
    remu = mu * y
    rezet = zet * z
    res = lam * s
    residu = np.concatenate((rex, rey, rez, relam, rexsi, reeta, remu, rezet, res), axis=0)
    return residu, float(np.linalg.norm(residu)), float(np.max(np.abs(residu)))


def kkt_norm(state, opts, df0dx, fval, dfdx):
    """KKT residual norm of the original problem at state.x, with the multipliers of the last update.

    Call it with the function values and gradients evaluated at the new design. None before the first update.
    """
    if state.multipliers is None:
        return None
    y, z, lam, xsi, eta, mu, zet, s = state.multipliers
    _, norm, _ = kktcheck(state.x, y, z, lam, xsi, eta, mu, zet, s, opts.xmin, opts.xmax,
                          _col(df0dx, opts.n), _col(fval, opts.m),
                          np.asarray(dfdx, dtype=float).reshape(opts.m, opts.n), opts.a0, opts.a, opts.c, opts.d)
    return norm
