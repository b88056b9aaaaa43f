"""Extended affine transform, bond prices and the deterministic shift.

The short rate is ``r_t = ell(t) + <Lambda, X_t>`` with ``ell`` a
piecewise-constant shift fitted to the discount curve at t = 0.  Writing
``Y_t = int_0^t <Lambda, X_s> ds`` and ``L(t, T) = int_t^T ell(z) dz``,
the conditional transform of ``(X, Y)`` is exponential-affine,

    E[ exp(<u, X_T> + v Y_T) | F_t ]
        = exp( Phi(T-t, u, v) + <Psi(T-t, u, v), X_t> + v Y_t ),

and all pricing coefficients reduce to the two shorthand families

    A0(t, t+tau, v) = Phi(tau, 0, -v) - v L(t, t+tau),   B0(tau, v) = Psi(tau, 0, -v),
    A1(t, t+tau, u) = Phi(tau, u, -1) -   L(t, t+tau),   B1(tau, u) = Psi(tau, u, -1),

so that zero-coupon bonds are ``P_t(T) = exp(A0(t,T,1) + <B0(T-t,1), X_t>)``.

Riccati paths for the recurring pairs (u = 0, v in {0, +-1}) are memoized
per session; the quadrature layers re-request them thousands of times.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from . import riccati
from .errors import DomainViolation, FitFailure
from .models import AffineModelSpec
from .riccati import DEFAULT_TOL


@dataclass(frozen=True)
class CurveSpec:
    """Piecewise-constant shift ell(t) on [0, knots[-1]], flat beyond.

    ``knots`` are the strictly increasing segment end points
    ``0 < t_1 < ... < t_K``; ``values[k]`` applies on ``[t_{k-1}, t_k)``
    (with t_0 = 0) and ``values[-1]`` extends flat past the last knot,
    so L(t, T) is exact for arbitrary stamps.
    """

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if knots.size == 0 or knots.size != values.size:
            raise ValueError("need matching, nonempty knots and values")
        if knots[0] <= 0.0 or np.any(np.diff(knots) <= 0.0):
            raise ValueError("knots must be strictly increasing and positive")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        starts = np.concatenate([[0.0], knots[:-1]])
        cum = np.concatenate([[0.0], np.cumsum(values * (knots - starts))])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)

    @staticmethod
    def flat(rate: float) -> "CurveSpec":
        return CurveSpec(knots=np.array([1.0]), values=np.array([float(rate)]))

    def ell(self, t):
        """Point value of the shift (right-continuous, flat extrapolation)."""
        t = np.asarray(t, dtype=float)
        idx = np.minimum(np.searchsorted(self.knots, t, side="right"),
                         len(self.knots) - 1)
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out

    def integral_from_zero(self, t):
        """L(0, t), exact for the piecewise-constant representation."""
        t = np.asarray(t, dtype=float)
        idx = np.minimum(np.searchsorted(self.knots, t, side="right"),
                         len(self.knots) - 1)
        start = np.where(idx > 0, self.knots[idx - 1], 0.0)
        out = self._cum[idx] + self.values[idx] * (t - start)
        return float(out) if out.ndim == 0 else out

    def L(self, t, T):
        """L(t, T) = int_t^T ell(z) dz;  additive by construction."""
        return self.integral_from_zero(T) - self.integral_from_zero(t)


@dataclass(frozen=True)
class MarketState:
    """Valuation-time snapshot: factor value, accrued integral, accrual factor.

    ``accrual_factor`` is the realized ``B_t / B_S`` and is only required
    when pricing inside an accrual period.
    """

    t: float
    X: np.ndarray
    Y: float = 0.0
    accrual_factor: float | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float).reshape(-1).copy()
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.accrual_factor is not None and self.accrual_factor <= 0.0:
            raise ValueError("accrual factor must be positive")

    def check_state_space(self, model: AffineModelSpec) -> None:
        if self.X.shape[0] != model.d:
            raise ValueError(f"state has dimension {self.X.shape[0]}, model needs {model.d}")
        if model.m and np.any(self.X[:model.m] < 0.0):
            raise ValueError("R_+^m components of the state must be nonnegative")


@dataclass(frozen=True)
class TransformCoeffs:
    """Shorthand coefficient bundle with the domain status of its solve."""

    A0: complex | None = None
    B0: np.ndarray | None = None
    A1: complex | None = None
    B1: np.ndarray | None = None
    valid: bool = True
    domain_note: str = "complete"


def _path_value(path: riccati.RiccatiPath, tau: float, what: str):
    if not path.status.is_complete and tau > path.t_end:
        raise DomainViolation(
            f"Riccati lifetime {path.t_end:.6g} shorter than requested {tau:g}",
            assumption=what, t_est=path.status.t_est)
    return path.phi_at(tau), path.psi_at(tau)


def bond_path(model: AffineModelSpec, horizon: float,
              tol: float = DEFAULT_TOL) -> riccati.RiccatiPath:
    """Memoized Riccati path for the bond pair (u, v) = (0, -1)."""
    return riccati.solve_cached(model, np.zeros(model.d), -1.0, horizon, tol)


def affine_transform(model: AffineModelSpec, curve: CurveSpec | None,
                     state: MarketState, T: float, u, v,
                     tol: float = DEFAULT_TOL) -> complex:
    """Conditional transform E[exp(<u,X_T> + v Y_T) | F_t].

    The deterministic shift does not enter (it is not part of (X, Y));
    the ``curve`` argument is accepted for signature symmetry with the
    other operations.  Raises :class:`DomainViolation` when (u, v) does
    not survive to ``T - t``.
    """
    state.check_state_space(model)
    if T < state.t:
        raise ValueError("T must not precede the valuation time")
    tau = T - state.t
    if tau == 0.0:
        u = np.asarray(u, dtype=complex).reshape(model.d)
        return complex(np.exp(u @ state.X + complex(v) * state.Y))
    path = riccati.solve_cached(model, u, v, tau, tol)
    phi, psi = _path_value(path, tau, "(u,v) in Y_{T-t}")
    return complex(np.exp(phi + psi @ state.X + complex(v) * state.Y))


def coeffs_A0B0(model: AffineModelSpec, curve: CurveSpec, t: float, T: float,
                v, tol: float = DEFAULT_TOL) -> TransformCoeffs:
    """A0(t,T,v) = Phi(T-t,0,-v) - v L(t,T) and B0(T-t,v) = Psi(T-t,0,-v)."""
    tau = T - t
    if tau < 0:
        raise ValueError("need T >= t")
    if tau == 0.0:
        return TransformCoeffs(A0=0.0 + 0.0j, B0=np.zeros(model.d, dtype=complex))
    path = riccati.solve_cached(model, np.zeros(model.d), -complex(v), tau, tol)
    phi, psi = _path_value(path, tau, "(0,-v) in Y_{T-t}")
    return TransformCoeffs(A0=phi - complex(v) * curve.L(t, T), B0=psi,
                           valid=path.status.is_complete,
                           domain_note=path.status.kind)


def coeffs_A1B1(model: AffineModelSpec, curve: CurveSpec, t: float, S: float,
                u, tol: float = DEFAULT_TOL) -> TransformCoeffs:
    """A1(t,S,u) = Phi(S-t,u,-1) - L(t,S) and B1(S-t,u) = Psi(S-t,u,-1)."""
    tau = S - t
    if tau < 0:
        raise ValueError("need S >= t")
    u = np.asarray(u, dtype=complex).reshape(model.d)
    if tau == 0.0:
        return TransformCoeffs(A1=0.0 + 0.0j, B1=u)
    path = riccati.solve_cached(model, u, -1.0, tau, tol)
    phi, psi = _path_value(path, tau, "(u,-1) in Y_{S-t}")
    return TransformCoeffs(A1=phi - curve.L(t, S), B1=psi,
                           valid=path.status.is_complete,
                           domain_note=path.status.kind)


def zcb_price(model: AffineModelSpec, curve: CurveSpec, state: MarketState,
              T: float, tol: float = DEFAULT_TOL) -> float:
    """Zero-coupon bond price P_t(T) = exp(A0(t,T,1) + <B0(T-t,1), X_t>)."""
    state.check_state_space(model)
    tau = T - state.t
    if tau < 0:
        raise ValueError("bond maturity precedes valuation time")
    if tau == 0.0:
        return 1.0
    path = bond_path(model, tau, tol)
    if not path.status.is_complete and tau > path.t_end:
        raise DomainViolation(
            "bond transform undefined: the pair (0,-1) leaves the domain "
            f"at t ~ {path.status.t_est:.6g}",
            assumption="(0,-1) in Y_T", t_est=path.status.t_est)
    phi, psi = path.phi_at(tau), path.psi_at(tau)
    value = np.exp(phi.real - curve.L(state.t, T) + psi.real @ state.X)
    return float(value)


def forward_looking_rate(model: AffineModelSpec, curve: CurveSpec,
                         state: MarketState, T: float,
                         tol: float = DEFAULT_TOL) -> float:
    """Forward-looking rate fixed at S = state.t: (1/P_S(T) - 1)/(T - S)."""
    p = zcb_price(model, curve, state, T, tol)
    return (1.0 / p - 1.0) / (T - state.t)


def fit_ell(model: AffineModelSpec, market_discounts, x0,
            tol: float = DEFAULT_TOL) -> CurveSpec:
    """Bootstrap the piecewise-constant shift from t = 0 discount factors.

    Each input pair ``(T_k, P_0(T_k))`` pins down L(0, T_k) exactly,

        L(0, T_k) = Phi(T_k, 0, -1) + <Psi(T_k, 0, -1), x0> - log P_0(T_k),

    so the segment values follow from successive differences.  The model
    reproduces every input discount to roundoff by construction.
    """
    pairs = sorted((float(T), float(P)) for T, P in market_discounts)
    if not pairs:
        raise FitFailure("no discount factors supplied")
    Ts = np.array([p[0] for p in pairs])
    Ps = np.array([p[1] for p in pairs])
    if Ts[0] <= 0.0 or np.any(np.diff(Ts) <= 0.0):
        raise FitFailure("maturities must be positive and strictly increasing")
    if np.any(Ps <= 0.0):
        raise FitFailure("discount factors must be positive")
    if np.any(np.diff(Ps) > 0.0):
        warnings.warn("discount factors are not decreasing; negative forward "
                      "rates implied", stacklevel=2)
    x0 = np.asarray(x0, dtype=float).reshape(model.d)
    path = bond_path(model, float(Ts[-1]), tol)
    if not path.status.is_complete and path.t_end < Ts[-1]:
        raise DomainViolation(
            "bond transform undefined over the curve horizon",
            assumption="(0,-1) in Y_T", t_est=path.status.t_est)
    phis = path.phi_at(Ts).real
    psis = path.psi_at(Ts).real
    L0 = phis + psis @ x0 - np.log(Ps)
    starts = np.concatenate([[0.0], Ts[:-1]])
    L_prev = np.concatenate([[0.0], L0[:-1]])
    values = (L0 - L_prev) / (Ts - starts)
    return CurveSpec(knots=Ts, values=values)


# ---------------------------------------------------------------------------
# curve / discount CSV interchange
# ---------------------------------------------------------------------------

def read_discount_csv(path_or_buffer) -> list[tuple[float, float]]:
    """Read `maturity_years,discount_factor` rows."""
    if hasattr(path_or_buffer, "read"):
        text = path_or_buffer.read()
    else:
        with open(path_or_buffer, "r", encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or "maturity_years" not in rows[0] or "discount_factor" not in rows[0]:
        raise ValueError("expected header maturity_years,discount_factor")
    return [(float(r["maturity_years"]), float(r["discount_factor"])) for r in rows]


def write_discount_csv(path_or_buffer, pairs) -> None:
    """Write `maturity_years,discount_factor` rows."""
    close = False
    if hasattr(path_or_buffer, "write"):
        fh = path_or_buffer
    else:
        fh = open(path_or_buffer, "w", encoding="utf-8", newline="")
        close = True
    try:
        fh.write("maturity_years,discount_factor\n")
        for T, P in pairs:
            fh.write(f"{T:.12g},{P:.12g}\n")
    finally:
        if close:
            fh.close()
