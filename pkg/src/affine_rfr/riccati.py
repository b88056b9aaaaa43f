"""Generalized Riccati system solver for the transform exponents (Phi, Psi).

The system integrated here is

    dPhi/dt = F(Psi(t)),            Phi(0) = 0,
    dPsi/dt = R(Psi(t)) + v*Lambda, Psi(0) = u,

for complex initial data ``u`` with ``Re(u)`` in the interior of the real
domain Y, and complex ``v``.  The stepper is an adaptive embedded
Dormand-Prince 5(4) pair marching a whole *batch* of initial conditions
at once (the batch axis is the quadrature-node axis of the pricing
integrals); the hot loop is numba-compiled.  Error control splits the
tolerance half absolute / half relative; dense output is cubic Hermite
on accepted steps with a defect check at an interior point so that
interpolation queries meet the same tolerance.

Three events terminate a trajectory before the horizon:

* blow-up: ``max |Psi| > 1e6``,
* step-size underflow below ``1e-12 * horizon`` (treated as blow-up),
* boundary hit: the domain margin of ``Re(Psi)`` drops below ``1e-8``.

The event time estimate locates the threshold crossing on the dense
output by bisection; the maximal lifetime reported this way is what the
rest of the library uses to certify transform arguments.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DomainViolation
from .models import AffineModelSpec

BLOWUP_NORM = 1.0e6
BOUNDARY_EPS = 1.0e-8
DEFAULT_TOL = 1.0e-10

# Dormand-Prince 5(4) tableau (row 7 equals the 5th-order weights: FSAL)
_A = np.zeros((7, 6))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B5 - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                     -92097 / 339200, 187 / 2100, 1 / 40])

_STAT_COMPLETE = 0
_STAT_BLOWUP = 1
_STAT_BOUNDARY = 2
_STAT_UNDERFLOW = 3


@njit(cache=True)
def _rhs(y, out, alpha, beta, lam, jslot, jcoord, jint, jrate, V):
    """out <- (F(psi), R(psi) + v*Lambda) for the batch state y = (phi, psi)."""
    k = y.shape[0]
    d = y.shape[1] - 1
    for n in range(k):
        for a in range(d + 1):
            acc = 0.0 + 0.0j
            for j in range(d):
                uj = y[n, 1 + j]
                row = 0.0 + 0.0j
                for c in range(d):
                    av = alpha[a, j, c]
                    if av != 0.0:
                        row += av * y[n, 1 + c]
                acc += uj * row + beta[a, j] * uj
            out[n, a] = acc
        for l in range(jslot.shape[0]):
            uc = y[n, 1 + jcoord[l]]
            out[n, jslot[l]] += jint[l] * uc / (jrate[l] - uc)
        for i in range(d):
            out[n, 1 + i] += V[n] * lam[i]


@njit(cache=True)
def _margin_min(y, jcoord, jrate):
    m = np.inf
    for n in range(y.shape[0]):
        for l in range(jcoord.shape[0]):
            v = jrate[l] - y[n, 1 + jcoord[l]].real
            if v < m:
                m = v
    return m


@njit(cache=True)
def _psi_max(y):
    m = 0.0
    for n in range(y.shape[0]):
        for c in range(1, y.shape[1]):
            v = abs(y[n, c])
            if v > m:
                m = v
    return m


@njit(cache=True)
def _err_norm(e, y0, y1, atol, rtol):
    m = 0.0
    for n in range(e.shape[0]):
        for c in range(e.shape[1]):
            ref = abs(y0[n, c])
            alt = abs(y1[n, c])
            if alt > ref:
                ref = alt
            v = abs(e[n, c]) / (atol + rtol * ref)
            if v > m:
                m = v
    return m


@njit(cache=True)
def _march(alpha, beta, lam, jslot, jcoord, jint, jrate, U, V,
           horizon, atol, rtol, dense, A, B5, E):
    """Adaptive DP5(4) march; returns stored nodes plus a status code."""
    k = U.shape[0]
    d = U.shape[1]
    nc = d + 1
    cap = 512
    ts = np.empty(cap)
    ys = np.empty((cap, k, nc), np.complex128)
    fs = np.empty((cap, k, nc), np.complex128)
    y = np.empty((k, nc), np.complex128)
    for n in range(k):
        y[n, 0] = 0.0
        for c in range(d):
            y[n, 1 + c] = U[n, c]
    f = np.empty_like(y)
    _rhs(y, f, alpha, beta, lam, jslot, jcoord, jint, jrate, V)
    ts[0] = 0.0
    ys[0] = y
    fs[0] = f
    nstore = 1
    # initial step: bound the first-derivative scale
    fmax = 0.0
    ymax = 0.0
    for n in range(k):
        for c in range(nc):
            if abs(f[n, c]) > fmax:
                fmax = abs(f[n, c])
            if abs(y[n, c]) > ymax:
                ymax = abs(y[n, c])
    sc0 = atol + rtol * max(ymax, 1.0)
    h = 0.01 * (sc0 / max(fmax, 1e-14)) ** 0.2
    if h > horizon:
        h = horizon
    if h < horizon * 1e-10:
        h = horizon * 1e-10
    hmin = 1e-12 * horizon
    t = 0.0
    status = _STAT_COMPLETE
    ks = np.empty((7, k, nc), np.complex128)
    yi = np.empty((k, nc), np.complex128)
    err = np.empty((k, nc), np.complex128)
    while t < horizon:
        if h > horizon - t:
            h = horizon - t
        if h < hmin:
            status = _STAT_UNDERFLOW
            break
        ks[0] = f
        bad = False
        for i in range(1, 7):
            for n in range(k):
                for c in range(nc):
                    acc = 0.0 + 0.0j
                    for j in range(i):
                        aij = A[i, j]
                        if aij != 0.0:
                            acc += aij * ks[j, n, c]
                    yi[n, c] = y[n, c] + h * acc
            if not np.all(np.isfinite(yi)):
                bad = True
                break
            _rhs(yi, ks[i], alpha, beta, lam, jslot, jcoord, jint, jrate, V)
        if bad or not np.all(np.isfinite(ks[6])):
            h *= 0.25
            continue
        # stage-7 argument is the 5th-order solution (FSAL)
        y_new = yi.copy()
        f_new = ks[6].copy()
        for n in range(k):
            for c in range(nc):
                acc = 0.0 + 0.0j
                for j in range(7):
                    ej = E[j]
                    if ej != 0.0:
                        acc += ej * ks[j, n, c]
                err[n, c] = h * acc
        enorm = _err_norm(err, y, y_new, atol, rtol)
        if not np.isfinite(enorm) or enorm > 1.0:
            fac = 0.2
            if np.isfinite(enorm):
                fac = 0.9 * enorm ** -0.2
                if fac < 0.2:
                    fac = 0.2
            h *= fac
            continue
        inorm = 0.0
        if dense:
            # cubic-Hermite defect at theta = 1/4 controls interpolation error
            th = 0.25
            h00 = (1 + 2 * th) * (1 - th) ** 2
            h10 = th * (1 - th) ** 2
            h01 = th * th * (3 - 2 * th)
            h11 = th * th * (th - 1)
            dh00 = 6 * th * th - 6 * th
            dh10 = 3 * th * th - 4 * th + 1
            dh11 = 3 * th * th - 2 * th
            for n in range(k):
                for c in range(nc):
                    yi[n, c] = (h00 * y[n, c] + h01 * y_new[n, c]
                                + h * (h10 * f[n, c] + h11 * f_new[n, c]))
            _rhs(yi, err, alpha, beta, lam, jslot, jcoord, jint, jrate, V)
            dmax = 0.0
            for n in range(k):
                for c in range(nc):
                    slope = ((dh00 * y[n, c] - dh00 * y_new[n, c]) / h
                             + dh10 * f[n, c] + dh11 * f_new[n, c])
                    ref = abs(y[n, c])
                    if abs(y_new[n, c]) > ref:
                        ref = abs(y_new[n, c])
                    v = abs(slope - err[n, c]) * h / 3.0 / (atol + rtol * ref)
                    if v > dmax:
                        dmax = v
            inorm = dmax
            if inorm > 1.0:
                fac = 0.9 * inorm ** -0.25
                if fac < 0.2:
                    fac = 0.2
                h *= fac
                continue
        t += h
        if nstore == cap:
            cap *= 2
            ts2 = np.empty(cap)
            ys2 = np.empty((cap, k, nc), np.complex128)
            fs2 = np.empty((cap, k, nc), np.complex128)
            ts2[:nstore] = ts
            ys2[:nstore] = ys
            fs2[:nstore] = fs
            ts, ys, fs = ts2, ys2, fs2
        ts[nstore] = t
        ys[nstore] = y_new
        fs[nstore] = f_new
        nstore += 1
        y, f = y_new, f_new
        if jcoord.shape[0] > 0 and _margin_min(y, jcoord, jrate) < BOUNDARY_EPS:
            status = _STAT_BOUNDARY
            break
        if _psi_max(y) > BLOWUP_NORM:
            status = _STAT_BLOWUP
            break
        base = enorm if enorm > inorm else inorm
        if base < 1e-10:
            base = 1e-10
        fac = 0.9 * base ** -0.2
        if fac > 5.0:
            fac = 5.0
        if fac < 0.2:
            fac = 0.2
        h *= fac
    return ts[:nstore], ys[:nstore], fs[:nstore], status


@dataclass(frozen=True)
class RiccatiStatus:
    """Terminal status of a solve: complete, blow-up or boundary hit."""

    kind: str                  # "complete" | "blowup" | "boundary"
    t_est: float | None = None

    @property
    def is_complete(self) -> bool:
        return self.kind == "complete"


@dataclass(frozen=True)
class LifetimeProbe:
    """Outcome of a real-initial-condition domain probe."""

    in_domain: bool
    t_est: float | None = None


class RiccatiPath:
    """Dense-output solution of the Riccati system for one (u, v) pair.

    Stores node values and derivatives of (Phi, Psi) on the accepted-step
    grid; queries between nodes use cubic Hermite interpolation, accurate
    to the solver tolerance.
    """

    def __init__(self, u0, v, ts, phi, psi, dphi, dpsi, status, tol):
        self.u0 = np.asarray(u0, dtype=complex)
        self.v = complex(v)
        self.grid = np.asarray(ts, dtype=float)
        self.phi = np.asarray(phi, dtype=complex)
        self.psi = np.asarray(psi, dtype=complex)
        self._dphi = np.asarray(dphi, dtype=complex)
        self._dpsi = np.asarray(dpsi, dtype=complex)
        self.status = status
        self.tol = tol

    @property
    def t_end(self) -> float:
        return float(self.grid[-1])

    def _hermite(self, t, values, derivs):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tq = np.atleast_1d(t)
        if np.any(tq < -1e-14) or np.any(tq > self.t_end * (1 + 1e-12) + 1e-14):
            raise ValueError(f"query time outside solved range [0, {self.t_end}]")
        tq = np.clip(tq, 0.0, self.t_end)
        idx = np.clip(np.searchsorted(self.grid, tq, side="right") - 1,
                      0, len(self.grid) - 2)
        t0 = self.grid[idx]
        h = self.grid[idx + 1] - t0
        th = np.where(h > 0, (tq - t0) / np.where(h > 0, h, 1.0), 0.0)
        th = th.reshape(th.shape + (1,) * (values.ndim - 1))
        hh = h.reshape(th.shape)
        y0, y1 = values[idx], values[idx + 1]
        f0, f1 = derivs[idx], derivs[idx + 1]
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th ** 2 * (3 - 2 * th)
        h11 = th ** 2 * (th - 1)
        out = h00 * y0 + h10 * hh * f0 + h01 * y1 + h11 * hh * f1
        return out[0] if scalar else out

    def phi_at(self, t):
        return self._hermite(t, self.phi, self._dphi)

    def psi_at(self, t):
        return self._hermite(t, self.psi, self._dpsi)

    def to_csv(self, path: str) -> None:
        """Dump the node grid: t, Re/Im Phi, Re/Im of each Psi component."""
        d = self.psi.shape[1]
        header = ["t", "phi_re", "phi_im"]
        for i in range(d):
            header += [f"psi{i + 1}_re", f"psi{i + 1}_im"]
        cols = [self.grid, self.phi.real, self.phi.imag]
        for i in range(d):
            cols += [self.psi[:, i].real, self.psi[:, i].imag]
        data = np.column_stack(cols)
        np.savetxt(path, data, delimiter=",", header=",".join(header), comments="")


def _margin_batch(model: AffineModelSpec, psi: np.ndarray) -> float:
    out = np.inf
    for j in model.active_jumps():
        out = min(out, float(np.min(j.rate - psi[:, j.coord].real)))
    return out


def _run(model: AffineModelSpec, U, V, horizon, tol, dense):
    U = np.ascontiguousarray(U, dtype=np.complex128).reshape(-1, model.d)
    V = np.ascontiguousarray(V, dtype=np.complex128).reshape(-1)
    if V.shape[0] == 1 and U.shape[0] > 1:
        V = np.full(U.shape[0], V[0], dtype=np.complex128)
    if U.shape[0] != V.shape[0]:
        raise ValueError("batch sizes of u and v differ")
    jslot, jcoord, jint, jrate = model.jump_arrays()
    ts, ys, fs, code = _march(
        np.ascontiguousarray(model.alpha), np.ascontiguousarray(model.beta),
        np.ascontiguousarray(model.Lambda), jslot, jcoord, jint, jrate,
        U, V, float(horizon), 0.5 * tol, 0.5 * tol, dense,
        _A, _B5, _E)
    if code == _STAT_COMPLETE:
        status = RiccatiStatus("complete")
    elif code == _STAT_UNDERFLOW:
        status = RiccatiStatus("blowup", t_est=float(ts[-1]))
    else:
        kind = "blowup" if code == _STAT_BLOWUP else "boundary"
        status = RiccatiStatus(kind, t_est=_locate_event(model, ts, ys, fs, kind))
    return ts, ys, fs, status


def _locate_event(model, ts, ys, fs, kind):
    """Bisect the Hermite interpolant of the last step for the crossing."""
    if len(ts) < 2:
        return float(ts[-1])
    t0, h = ts[-2], ts[-1] - ts[-2]
    y0, y1 = ys[-2], ys[-1]
    f0, f1 = fs[-2], fs[-1]

    def crossed(th):
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th ** 2 * (3 - 2 * th)
        h11 = th ** 2 * (th - 1)
        y = h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
        if kind == "boundary":
            return _margin_batch(model, y[:, 1:]) < BOUNDARY_EPS
        return float(np.max(np.abs(y[:, 1:]))) > BLOWUP_NORM

    lo, hi = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if crossed(mid):
            hi = mid
        else:
            lo = mid
    return float(t0 + hi * h)


def solve(model: AffineModelSpec, u, v, horizon: float,
          tol: float = DEFAULT_TOL) -> RiccatiPath:
    """Solve the Riccati system for one complex pair (u, v).

    Returns a dense-output :class:`RiccatiPath` on ``[0, min(horizon, T+)]``
    whose status records a blow-up or boundary hit when the maximal
    lifetime T+ is shorter than the horizon.

    Raises :class:`DomainViolation` when ``Re(u)`` starts outside the
    interior of Y.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if not (0.0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    u = np.asarray(u, dtype=complex).reshape(model.d)
    if model.domain_margin(u.real) <= 0.0:
        raise DomainViolation("initial condition outside interior(Y)",
                              assumption="Re(u) in interior(Y)")
    ts, ys, fs, status = _run(model, u[None, :], [v], horizon, tol, dense=True)
    return RiccatiPath(u, v, ts, ys[:, 0, 0], ys[:, 0, 1:],
                       fs[:, 0, 0], fs[:, 0, 1:], status, tol)


def solve_endpoints(model: AffineModelSpec, U, V, horizon: float,
                    tol: float = DEFAULT_TOL):
    """Endpoint values (Phi, Psi) at the horizon for a batch of (u, v).

    The batch shares adaptive steps; any blow-up or boundary hit raises
    :class:`DomainViolation` (pricing integrands must stay certified).
    A zero horizon returns the initial data unchanged.
    """
    U = np.asarray(U, dtype=complex).reshape(-1, model.d)
    V = np.asarray(V, dtype=complex).reshape(-1)
    if horizon == 0.0:
        return np.zeros(U.shape[0], dtype=complex), U.copy()
    ts, ys, fs, status = _run(model, U, V, horizon, tol, dense=False)
    if not status.is_complete:
        raise DomainViolation(
            f"transform argument left the domain at t ~ {status.t_est:.6g} "
            f"before horizon {horizon:g}",
            assumption="(u,v) in Y_horizon", t_est=status.t_est)
    return ys[-1, :, 0], ys[-1, :, 1:]


def lifetime_probe(model: AffineModelSpec, u_real, v_real, horizon: float,
                   tol: float = DEFAULT_TOL) -> LifetimeProbe:
    """Check whether a real pair (u, v) lies in Y_horizon.

    ``in_domain`` is True iff the real Riccati solution stays in the
    interior of Y through the horizon; otherwise ``t_est`` reports the
    exit-time estimate.
    """
    u_real = np.asarray(u_real, dtype=float)
    path = solve(model, u_real.astype(complex), complex(v_real), horizon, tol)
    if path.status.is_complete:
        return LifetimeProbe(True)
    return LifetimeProbe(False, t_est=path.status.t_est)


def semiflow_residual(model: AffineModelSpec, u, v, s: float, t: float,
                      tol: float = DEFAULT_TOL) -> float:
    """Residual of the semiflow relations at the split (s, t).

    Compares Phi(s+t, u, v) against Phi(t, u, v) + Phi(s, Psi(t, u, v), v)
    and Psi(s+t, u, v) against Psi(s, Psi(t, u, v), v); returns the max
    absolute mismatch.
    """
    if s < 0 or t < 0:
        raise ValueError("s and t must be nonnegative")
    total = s + t
    if total == 0.0:
        return 0.0
    base = solve(model, u, v, total, tol)
    if not base.status.is_complete:
        raise DomainViolation("semiflow split exceeds the lifetime",
                              assumption="s+t <= T+(u,v)")
    phi_t = base.phi_at(t)
    psi_t = base.psi_at(t)
    if s == 0.0:
        phi_second = 0.0
        psi_second = psi_t
    else:
        second = solve(model, psi_t, v, s, tol)
        phi_second = second.phi_at(s)
        psi_second = second.psi_at(s)
    res_phi = abs(base.phi_at(total) - phi_t - phi_second)
    res_psi = float(np.max(np.abs(base.psi_at(total) - psi_second)))
    return max(res_phi, res_psi)


# ---------------------------------------------------------------------------
# memoized solves (bond exponents are requested thousands of times per session)
# ---------------------------------------------------------------------------

_CACHE: dict[tuple, RiccatiPath] = {}
_CACHE_LOCK = threading.Lock()
_CACHE_MAX = 256


def solve_cached(model: AffineModelSpec, u, v, horizon: float,
                 tol: float = DEFAULT_TOL) -> RiccatiPath:
    """Memoized :func:`solve`, re-solving only when the horizon grows."""
    u = np.asarray(u, dtype=complex).reshape(model.d)
    key = (model.key(), tuple(u.tolist()), complex(v), float(tol))
    path = _CACHE.get(key)
    if path is not None and (path.t_end >= horizon or not path.status.is_complete):
        return path
    path = solve(model, u, v, max(horizon, 1.0), tol)
    with _CACHE_LOCK:
        if len(_CACHE) >= _CACHE_MAX:
            _CACHE.clear()
        _CACHE[key] = path
    return path


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()
