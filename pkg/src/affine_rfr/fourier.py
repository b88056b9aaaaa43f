"""Fourier pricing of caplets/floorlets on forward-looking, backward-looking
and term-basis payoffs.

All prices are one-dimensional damped Fourier integrals

    Pi(w) = integral over R of  W(lambda) * kern(w, lambda) dlambda,

with a branch table turning Pi(w) into caplet/floorlet prices depending
on which side of the kernel poles {0, 1} the damping parameter w sits:

    caplet   = Pi(w)                 w in (w-, 0)
             = Pi(w) + P_t(S)        w in (0, 1)
    floorlet = Pi(w)                 w in (1, w+)
             = Pi(w) + K' P_t(T)     w in (0, 1)

(for the term-basis option the strip is capped at 1 and the floorlet
price equals the caplet price before the accrual period starts).

The strike kernel is

    h(w, lambda) = (1/2pi) K'^{w+i lambda} / ((w+i lambda)(w-1+i lambda)),

with K' = 1 + (T-S)(K - spread); the term-basis kernel k(w, lambda) drops
the K' power.  The valid damping values form a strip (w-, w+) around
[0, 1] determined by transform integrability; ``damping_strip`` certifies
it numerically by expanding outward and bisecting against the Riccati
lifetime probes:

    forward:    (w B0(T-S, 1), -1)                    in Y_S
    backward:   (0, -w) in Y_{T-S}  and  (B0(T-S, w), -1) in Y_S
    term-basis: (B0(T-S, w) - w B0(T-S, 1), -1)       in Y_S,  w < 1

Transform factors W are evaluated on the quadrature node batches through
chained Riccati solves; per-node costs are amortized by the batched
integrator in :mod:`affine_rfr.riccati`.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass

import numpy as np

from . import riccati, transform
from .errors import (DampingOutOfStrip, DomainViolation, MissingAccrualFactor,
                     NoStrip, PoleAtW)
from .models import AffineModelSpec
from .quadrature import QuadratureConfig, RationalKernel, integrate_halfline
from .riccati import DEFAULT_TOL
from .transform import CurveSpec, MarketState

STYLES = ("forward", "backward", "term_basis")
KINDS = ("caplet", "floorlet")

_STRIP_EPS = 1.0e-4
_STRIP_RESOLUTION = 1.0e-3
_STRIP_CAP_LO = -16.0
_STRIP_CAP_HI = 17.0


@dataclass(frozen=True)
class OptionSpec:
    """Caplet/floorlet contract on the accrual period [S, T].

    ``spread`` is the fixed fallback adjustment; it enters only through
    the strike shift K -> K - spread.  The strike is ignored for
    term-basis options.
    """

    style: str
    kind: str
    S: float
    T: float
    K: float | None = None
    spread: float = 0.0

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if not (0.0 <= self.S < self.T):
            raise ValueError("need 0 <= S < T")
        if self.style != "term_basis":
            if self.K is None:
                raise ValueError("strike required for forward/backward options")
            if self.k_prime <= 0.0:
                raise ValueError("need 1 + (T-S)(K - spread) > 0")

    @property
    def tau(self) -> float:
        return self.T - self.S

    @property
    def k_prime(self) -> float:
        """Compounded strike K' = 1 + (T-S)(K - spread)."""
        if self.style == "term_basis":
            return 1.0
        return 1.0 + self.tau * (self.K - self.spread)


@dataclass(frozen=True)
class DampingStrip:
    """Numerically certified strip of valid damping parameters."""

    w_minus: float
    w_plus: float
    S: float
    T: float
    style: str

    def contains(self, w: float) -> bool:
        return self.w_minus < w < self.w_plus and w not in (0.0, 1.0)


@dataclass
class PriceResult:
    """Price plus quadrature diagnostics; serializes to the wire format."""

    price: float
    w: float | None
    lambda_max: float
    nodes: int
    imag_residual: float
    strip: tuple[float, float]

    def to_json(self) -> str:
        return json.dumps({
            "price": self.price,
            "w": self.w,
            "lambda_max": self.lambda_max,
            "nodes": self.nodes,
            "imag_residual": self.imag_residual,
            "strip": [self.strip[0], self.strip[1]],
        })


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def kernel_h(w: float, lam, k_prime: float):
    """Strike kernel h(w, lambda); poles at w = 0 and w = 1."""
    if w in (0.0, 1.0):
        raise PoleAtW("damping parameter w must avoid {0, 1}")
    lam = np.asarray(lam, dtype=float)
    il = 1j * lam
    val = (k_prime ** (w + il)) / (2.0 * np.pi * (w + il) * (w - 1.0 + il))
    return complex(val) if val.ndim == 0 else val


def kernel_k(w: float, lam):
    """Strike-free kernel k(w, lambda) of the term-basis integral."""
    if w in (0.0, 1.0):
        raise PoleAtW("damping parameter w must avoid {0, 1}")
    lam = np.asarray(lam, dtype=float)
    il = 1j * lam
    val = 1.0 / (2.0 * np.pi * (w + il) * (w - 1.0 + il))
    return complex(val) if val.ndim == 0 else val


def lemma_a1_eval(x: float, k: float, w: float,
                  quad: QuadratureConfig | None = None) -> float:
    """Quadrature self-test: the payoff-decomposition integral.

    Evaluates (1/2pi) int x^{w+il} k^{-(w-1+il)} / ((w+il)(w-1+il)) dl,
    whose closed form is (k-x)^+ for w < 0, (x-k)^+ - x on (0, 1) and
    (x-k)^+ for w > 1.
    """
    if x < 0 or k <= 0:
        raise ValueError("need x >= 0 and k > 0")
    if w in (0.0, 1.0):
        raise PoleAtW("w must avoid {0, 1}")
    quad = quad or QuadratureConfig()
    if x == 0.0:
        # integrand vanishes for w > 0; for w < 0 the decomposition gives k
        return float(k) if w < 0 else 0.0
    a = float(np.log(x / k))
    kern = RationalKernel(w=w, a=a, pref=x ** w * k ** (1.0 - w) / (2.0 * np.pi))
    (total, _), = integrate_halfline(
        lambda lam: np.ones(len(lam), dtype=complex), [kern], quad,
        freq_hint=abs(a) + 1e-9)
    return float(2.0 * np.real(total))


# ---------------------------------------------------------------------------
# damping strip certification
# ---------------------------------------------------------------------------

_STRIP_CACHE: dict[tuple, DampingStrip] = {}
_STRIP_LOCK = threading.Lock()


def _bond_or_raise(model: AffineModelSpec, horizon: float, tol: float):
    path = transform.bond_path(model, horizon, tol)
    if not path.status.is_complete and path.t_end < horizon:
        raise DomainViolation(
            "bond transform undefined over the option horizon",
            assumption="(0,-1) in Y_T", t_est=path.status.t_est)
    return path


def _expand_and_bisect(ok, start: float, cap: float) -> float:
    """Doubling search away from `start` toward `cap`, then bisection.

    Returns the last certified-valid value; assumes ok(start) is True.
    """
    good = start
    step = abs(start)
    while True:
        cand = good + np.sign(cap - start) * step
        if (cap - cand) * np.sign(cap - start) <= 0.0:
            cand = cap
        if ok(cand):
            good = cand
            if cand == cap:
                return cap
            step *= 2.0
        else:
            bad = cand
            break
    while abs(bad - good) > _STRIP_RESOLUTION:
        mid = 0.5 * (bad + good)
        if ok(mid):
            good = mid
        else:
            bad = mid
    return good


def damping_strip(model: AffineModelSpec, curve: CurveSpec, spec: OptionSpec,
                  tol: float = DEFAULT_TOL) -> DampingStrip:
    """Certify the strip of valid damping parameters for this contract.

    Expands outward from (-eps, 1+eps), doubling until the lifetime probe
    fails, then bisects to 1e-3 resolution; search is capped at
    [-16, 17].  Raises :class:`NoStrip` when even w = -1e-4 (or the
    matching upper start) fails.
    """
    S, T = spec.S, spec.T
    key = (model.key(), spec.style, round(S, 12), round(T, 12), float(tol))
    hit = _STRIP_CACHE.get(key)
    if hit is not None:
        return hit

    bond = _bond_or_raise(model, T, tol)
    tau = T - S
    b0_bond = bond.psi_at(tau).real

    def ok_forward(w: float) -> bool:
        if S == 0.0:
            return True
        probe = riccati.lifetime_probe(model, w * b0_bond, -1.0, S, tol)
        return probe.in_domain

    def _inner_b0(w: float):
        if model.domain_margin(np.zeros(model.d)) <= 0.0:
            return None
        path = riccati.solve(model, np.zeros(model.d), -w, tau, tol)
        if not path.status.is_complete:
            return None
        return path.psi_at(tau).real

    def ok_backward(w: float) -> bool:
        b0w = _inner_b0(w)
        if b0w is None:
            return False
        if S == 0.0:
            return True
        if model.domain_margin(b0w) <= 0.0:
            return False
        return riccati.lifetime_probe(model, b0w, -1.0, S, tol).in_domain

    def ok_term_basis(w: float) -> bool:
        b0w = _inner_b0(w)
        if b0w is None:
            return False
        u2 = b0w - w * b0_bond
        if S == 0.0:
            return True
        if model.domain_margin(u2) <= 0.0:
            return False
        return riccati.lifetime_probe(model, u2, -1.0, S, tol).in_domain

    ok = {"forward": ok_forward, "backward": ok_backward,
          "term_basis": ok_term_basis}[spec.style]

    if not ok(-_STRIP_EPS):
        raise NoStrip(f"no damping strip below 0 for style {spec.style}; "
                      "model/assumption breach", assumption="w- < 0 exists")
    w_minus = _expand_and_bisect(ok, -_STRIP_EPS, _STRIP_CAP_LO)

    if spec.style == "term_basis":
        w_plus = 1.0
    else:
        if not ok(1.0 + _STRIP_EPS):
            raise NoStrip(f"no damping strip above 1 for style {spec.style}; "
                          "model/assumption breach", assumption="w+ > 1 exists")
        w_plus = _expand_and_bisect(ok, 1.0 + _STRIP_EPS, _STRIP_CAP_HI)

    strip = DampingStrip(w_minus=float(w_minus), w_plus=float(w_plus),
                         S=S, T=T, style=spec.style)
    with _STRIP_LOCK:
        _STRIP_CACHE[key] = strip
    return strip


def default_damping(strip: DampingStrip, kind: str) -> float:
    """Midpoint-style defaults: caplets w-/2, floorlets (1+w+)/2."""
    return 0.5 * strip.w_minus if kind == "caplet" else 0.5 * (1.0 + strip.w_plus)


# ---------------------------------------------------------------------------
# transform factors per style
# ---------------------------------------------------------------------------

def _freq_scale(model: AffineModelSpec, X: np.ndarray) -> float:
    jump = sum(j.intensity / j.rate for j in model.active_jumps())
    return float(np.linalg.norm(model.beta[0]) + jump
                 + np.abs(model.Lambda) @ np.maximum(np.abs(X), 0.1))


def _forward_w_fn(model, curve, state, spec, w, tol):
    bond = _bond_or_raise(model, spec.T, tol)
    tau = spec.tau
    a0_st = complex(bond.phi_at(tau)) - curve.L(spec.S, spec.T)
    b0 = bond.psi_at(tau).real
    t, S = state.t, spec.S
    L_ts = curve.L(t, S)
    X = state.X

    def w_fn(lam):
        wi = w + 1j * np.asarray(lam, dtype=float)
        U = wi[:, None] * b0[None, :]
        phi2, psi2 = riccati.solve_endpoints(model, U, -np.ones(len(wi)),
                                             S - t, tol)
        expo = wi * a0_st + (phi2 - L_ts) + psi2 @ X
        return np.exp(expo)

    freq = abs(a0_st) + abs(float(b0 @ X)) + (S - t) * _freq_scale(model, X) \
        * float(np.linalg.norm(b0))
    return w_fn, freq


def _backward_w_fn(model, curve, state, spec, w, tol):
    t, S, T = state.t, spec.S, spec.T
    tau = spec.tau
    L_st = curve.L(S, T)
    L_ts = curve.L(t, S)
    X = state.X
    zeros = np.zeros(model.d, dtype=complex)

    def w_fn(lam):
        wi = w + 1j * np.asarray(lam, dtype=float)
        U1 = np.broadcast_to(zeros, (len(wi), model.d))
        phi1, psi1 = riccati.solve_endpoints(model, U1, -wi, tau, tol)
        a0 = phi1 - wi * L_st
        phi2, psi2 = riccati.solve_endpoints(model, psi1, -np.ones(len(wi)),
                                             S - t, tol)
        expo = a0 + (phi2 - L_ts) + psi2 @ X
        return np.exp(expo)

    freq = abs(L_st) + tau * _freq_scale(model, X) * (1.0 + float(np.sum(np.abs(model.Lambda))))
    return w_fn, freq


def _term_basis_w_fn(model, curve, state, spec, w, tol):
    bond = _bond_or_raise(model, spec.T, tol)
    tau = spec.tau
    phib = complex(bond.phi_at(tau))
    b0 = bond.psi_at(tau).real
    t, S = state.t, spec.S
    L_ts = curve.L(t, S)
    X = state.X
    zeros = np.zeros(model.d, dtype=complex)

    def w_fn(lam):
        wi = w + 1j * np.asarray(lam, dtype=float)
        U1 = np.broadcast_to(zeros, (len(wi), model.d))
        phi1, psi1 = riccati.solve_endpoints(model, U1, -wi, tau, tol)
        u2 = psi1 - wi[:, None] * b0[None, :]
        phi2, psi2 = riccati.solve_endpoints(model, u2, -np.ones(len(wi)),
                                             S - t, tol)
        expo = (phi1 - wi * phib) + (phi2 - L_ts) + psi2 @ X
        return np.exp(expo)

    freq = abs(phib) + abs(float(b0 @ X)) + spec.tau * _freq_scale(model, X)
    return w_fn, freq


# ---------------------------------------------------------------------------
# pricing operations
# ---------------------------------------------------------------------------

def _validate_damping(spec: OptionSpec, strip: DampingStrip, w: float) -> None:
    if w in (0.0, 1.0):
        raise PoleAtW("damping parameter w must avoid {0, 1}")
    if not strip.contains(w):
        raise DampingOutOfStrip(
            f"w={w:g} outside the certified strip ({strip.w_minus:g}, {strip.w_plus:g})")
    if spec.kind == "caplet" and w > 1.0:
        raise DampingOutOfStrip("caplet representation requires w < 1")
    if spec.kind == "floorlet" and w < 0.0:
        raise DampingOutOfStrip("floorlet representation requires w > 0")


def _branch_shift(model, curve, state, spec, w, tol) -> float:
    """Additive term of the branch table for damping in (0, 1)."""
    if not (0.0 < w < 1.0):
        return 0.0
    if spec.kind == "caplet" or spec.style == "term_basis":
        return transform.zcb_price(model, curve, state, spec.S, tol)
    return spec.k_prime * transform.zcb_price(model, curve, state, spec.T, tol)


def _price_from_integral(model, curve, state, spec, w, strip, quad, w_fn, freq,
                         kern, tol) -> PriceResult:
    (total, diag), = integrate_halfline(w_fn, [kern], quad, freq)
    price = 2.0 * float(np.real(total)) + _branch_shift(model, curve, state,
                                                        spec, w, tol)
    return PriceResult(price=price, w=w, lambda_max=diag.lambda_max,
                       nodes=diag.n_nodes, imag_residual=diag.imag_residual,
                       strip=(strip.w_minus, strip.w_plus))


def _common_checks(model, state, spec):
    state.check_state_space(model)
    if state.t > spec.S:
        raise ValueError("valuation time must not exceed the accrual start")


def price_forward_option(model: AffineModelSpec, curve: CurveSpec,
                         state: MarketState, spec: OptionSpec,
                         w: float | None = None,
                         quad: QuadratureConfig | None = None,
                         tol: float = DEFAULT_TOL) -> PriceResult:
    """Forward-looking caplet/floorlet via the damped Fourier integral."""
    if spec.style != "forward":
        raise ValueError("spec.style must be 'forward'")
    _common_checks(model, state, spec)
    quad = quad or QuadratureConfig()
    strip = damping_strip(model, curve, spec, tol)
    if w is None:
        w = default_damping(strip, spec.kind)
    _validate_damping(spec, strip, w)
    w_fn, freq = _forward_w_fn(model, curve, state, spec, w, tol)
    kern = RationalKernel(w=w, a=float(np.log(spec.k_prime)),
                          pref=spec.k_prime ** w / (2.0 * np.pi))
    freq += abs(np.log(spec.k_prime))
    return _price_from_integral(model, curve, state, spec, w, strip, quad,
                                w_fn, freq, kern, tol)


def price_backward_option(model: AffineModelSpec, curve: CurveSpec,
                          state: MarketState, spec: OptionSpec,
                          w: float | None = None,
                          quad: QuadratureConfig | None = None,
                          tol: float = DEFAULT_TOL) -> PriceResult:
    """Backward-looking caplet/floorlet (compounded in arrears) pricing.

    Each quadrature node chains two Riccati solves mirroring the semiflow
    composition: first (0, -(w+i lambda)) over [0, T-S], then the
    resulting B0 with v = -1 over [0, S-t].
    """
    if spec.style != "backward":
        raise ValueError("spec.style must be 'backward'")
    _common_checks(model, state, spec)
    quad = quad or QuadratureConfig()
    strip = damping_strip(model, curve, spec, tol)
    if w is None:
        w = default_damping(strip, spec.kind)
    _validate_damping(spec, strip, w)
    w_fn, freq = _backward_w_fn(model, curve, state, spec, w, tol)
    kern = RationalKernel(w=w, a=float(np.log(spec.k_prime)),
                          pref=spec.k_prime ** w / (2.0 * np.pi))
    freq += abs(np.log(spec.k_prime))
    return _price_from_integral(model, curve, state, spec, w, strip, quad,
                                w_fn, freq, kern, tol)


def price_backward_in_accrual(model: AffineModelSpec, curve: CurveSpec,
                              state: MarketState, spec: OptionSpec,
                              w: float | None = None,
                              quad: QuadratureConfig | None = None,
                              tol: float = DEFAULT_TOL) -> PriceResult:
    """Backward-looking option valued inside the accrual period [S, T].

    Requires the realized accrual factor B_t/B_S on the state; only the
    (w-, 0) damping branch exists here.  At t = T the integral collapses
    to the intrinsic value (accrual_factor - K')^+ for a caplet.
    """
    if spec.style != "backward":
        raise ValueError("in-accrual valuation applies to backward options")
    state.check_state_space(model)
    if not (spec.S <= state.t <= spec.T):
        raise ValueError("valuation time must lie inside [S, T]")
    if state.accrual_factor is None:
        raise MissingAccrualFactor("state.accrual_factor (B_t/B_S) is required")
    quad = quad or QuadratureConfig()
    t, T = state.t, spec.T
    af = float(state.accrual_factor)

    # strip: only the lifetime of (0, -w) over the remaining window binds
    def ok(wc: float) -> bool:
        if T - t == 0.0:
            return True
        path = riccati.solve(model, np.zeros(model.d), -wc, T - t, tol)
        return path.status.is_complete

    if not ok(-_STRIP_EPS):
        raise NoStrip("no in-accrual damping below 0", assumption="w- < 0 exists")
    w_minus = _expand_and_bisect(ok, -_STRIP_EPS, _STRIP_CAP_LO)
    strip = DampingStrip(w_minus=float(w_minus), w_plus=0.0, S=spec.S, T=T,
                         style="backward")
    if w is None:
        w = 0.5 * strip.w_minus
    if not (strip.w_minus < w < 0.0):
        raise DampingOutOfStrip(
            f"in-accrual valuation requires w in ({strip.w_minus:g}, 0)")

    L_tT = curve.L(t, T)
    X = state.X
    ln_af = np.log(af)
    zeros = np.zeros(model.d, dtype=complex)

    def w_fn(lam):
        wi = w + 1j * np.asarray(lam, dtype=float)
        U1 = np.broadcast_to(zeros, (len(wi), model.d))
        phi1, psi1 = riccati.solve_endpoints(model, U1, -wi, T - t, tol)
        expo = (phi1 - wi * L_tT) + psi1 @ X - (wi - 1.0) * ln_af
        return np.exp(expo)

    freq = abs(L_tT) + abs(ln_af) + abs(np.log(spec.k_prime)) \
        + (T - t) * _freq_scale(model, X)
    kern = RationalKernel(w=w, a=float(np.log(spec.k_prime)),
                          pref=spec.k_prime ** w / (2.0 * np.pi))
    (total, diag), = integrate_halfline(w_fn, [kern], quad, freq)
    price = 2.0 * float(np.real(total))
    if spec.kind == "floorlet":
        # parity inside the accrual period:
        # caplet - floorlet = B_t/B_S - K' P_t(T)
        price = price - af + spec.k_prime * transform.zcb_price(
            model, curve, state, T, tol)
    return PriceResult(price=price, w=w, lambda_max=diag.lambda_max,
                       nodes=diag.n_nodes, imag_residual=diag.imag_residual,
                       strip=(strip.w_minus, strip.w_plus))


def price_term_basis(model: AffineModelSpec, curve: CurveSpec,
                     state: MarketState, spec: OptionSpec,
                     w: float | None = None,
                     quad: QuadratureConfig | None = None,
                     tol: float = DEFAULT_TOL) -> PriceResult:
    """Term-basis caplet (= floorlet for t <= S): exchange option between
    the backward-looking and forward-looking rates."""
    if spec.style != "term_basis":
        raise ValueError("spec.style must be 'term_basis'")
    _common_checks(model, state, spec)
    quad = quad or QuadratureConfig()
    strip = damping_strip(model, curve, spec, tol)
    if w is None:
        w = 0.5 * strip.w_minus
    _validate_damping(OptionSpec("term_basis", "caplet", spec.S, spec.T),
                      strip, w)
    w_fn, freq = _term_basis_w_fn(model, curve, state, spec, w, tol)
    kern = RationalKernel(w=w, a=0.0, pref=1.0 / (2.0 * np.pi))
    return _price_from_integral(model, curve, state, spec, w, strip, quad,
                                w_fn, freq, kern, tol)


def price_option(model, curve, state, spec: OptionSpec, w=None, quad=None,
                 tol: float = DEFAULT_TOL) -> PriceResult:
    """Dispatch on the option style (in-accrual when state.t > S)."""
    if spec.style == "forward":
        return price_forward_option(model, curve, state, spec, w, quad, tol)
    if spec.style == "term_basis":
        return price_term_basis(model, curve, state, spec, w, quad, tol)
    if state.t > spec.S or state.accrual_factor is not None:
        return price_backward_in_accrual(model, curve, state, spec, w, quad, tol)
    return price_backward_option(model, curve, state, spec, w, quad, tol)


def price_strike_ladder(model: AffineModelSpec, curve: CurveSpec,
                        state: MarketState, spec: OptionSpec, strikes,
                        w: float | None = None,
                        quad: QuadratureConfig | None = None,
                        tol: float = DEFAULT_TOL) -> list[PriceResult]:
    """Price a whole strike ladder on one transform evaluation.

    The strike enters only through K'^{w+i lambda} in the kernel, so the
    node grid and all Riccati solves are shared across strikes and only
    the kernel weights change (the fast-transform evaluation path).
    """
    if spec.style == "term_basis":
        raise ValueError("term-basis options have no strike ladder")
    strikes = [float(k) for k in strikes]
    if not strikes:
        return []
    _common_checks(model, state, spec)
    quad = quad or QuadratureConfig()
    specs = [OptionSpec(spec.style, spec.kind, spec.S, spec.T, K=k,
                        spread=spec.spread) for k in strikes]
    strip = damping_strip(model, curve, specs[0], tol)
    if w is None:
        w = default_damping(strip, spec.kind)
    for sp in specs:
        _validate_damping(sp, strip, w)
    if spec.style == "forward":
        w_fn, freq = _forward_w_fn(model, curve, state, specs[0], w, tol)
    else:
        w_fn, freq = _backward_w_fn(model, curve, state, specs[0], w, tol)
    kerns = [RationalKernel(w=w, a=float(np.log(sp.k_prime)),
                            pref=sp.k_prime ** w / (2.0 * np.pi))
             for sp in specs]
    freq += max(abs(np.log(sp.k_prime)) for sp in specs)
    results = integrate_halfline(w_fn, kerns, quad, freq)
    out = []
    for sp, (total, diag) in zip(specs, results):
        price = 2.0 * float(np.real(total)) + _branch_shift(
            model, curve, state, sp, w, tol)
        out.append(PriceResult(price=price, w=w, lambda_max=diag.lambda_max,
                               nodes=diag.n_nodes,
                               imag_residual=diag.imag_residual,
                               strip=(strip.w_minus, strip.w_plus)))
    return out
