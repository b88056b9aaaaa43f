"""Oscillatory quadrature shared by the Fourier and Gil-Pelaez pricers.

All pricing integrals here have the shape

    integral over R of  W(lambda) * kern(lambda) dlambda,

where ``W`` is a conditional-transform factor (entire in lambda, computed
by batched Riccati solves) and ``kern`` decays like ``lambda^-2`` (strike
kernels) or ``lambda^-1`` (Gil-Pelaez).  The integrand satisfies
``f(-lambda) = conj(f(lambda))``, so only the half line is evaluated and
the result is ``2 Re`` of the half-line value.

Scheme: Gauss-Legendre panels whose widths grow geometrically but are
capped so that the dominant oscillation advances at most ~n/2 radians
per panel, plus an analytic tail correction.  The tail extrapolates
``W(lambda) ~ W_N exp(z (lambda - lambda_N))`` from the last two nodes
(log-linear fit, exact for deterministic models where W is a pure
exponential) and integrates it against the kernel in closed form via the
exponential integral E1:

    int_L^inf e^{s l} / (c + i l) dl = -i e^{i s c} E1(-s (L - i c)),
    int_L^inf e^{s l} / l       dl =  E1(-s L),       Re s <= 0.

Convergence is self-validating: the tail predicted at one panel edge is
compared against the actually computed next panel plus its tail; the
run stops when consecutive totals stabilize below tolerance.

Several kernels may ride on one node grid (strike ladders reuse the
transform values, only the kernel changes with the strike).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import exp1, roots_legendre

from .errors import QuadratureFailure

_SCHEMES = {"gauss": "GaussLegendrePanels", "trapezoid": "AdaptiveTruncatedTrapezoid"}


@dataclass
class QuadratureConfig:
    """Knobs of the oscillatory integrator.

    ``n_nodes`` is the per-panel node count; ``lambda_max`` caps the
    truncation search; ``rel_tol`` is a relative target against the
    integral magnitude (deltas below the roundoff floor also stop the
    panel loop).
    """

    scheme: str = "gauss"
    lambda_max: float = 2.0 ** 14
    n_nodes: int = 64
    rel_tol: float = 1.0e-9
    threads: int = 1
    mirror: bool = False     # evaluate -lambda nodes too (symmetry diagnostic)

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {sorted(_SCHEMES)}")
        if self.n_nodes < 8:
            raise ValueError("need at least 8 nodes per panel")


@dataclass
class QuadDiagnostics:
    lambda_max: float = 0.0
    n_nodes: int = 0
    tail_estimate: float = 0.0
    converged: bool = False
    imag_residual: float = 0.0


@dataclass(frozen=True)
class RationalKernel:
    """pref * e^{i a lambda} / ((w + i lambda)(w - 1 + i lambda)).

    Covers both strike kernels: ``a = log K'`` and ``pref = K'^w / 2 pi``
    for the strike-dependent one, ``a = 0`` and ``pref = 1 / 2 pi`` for
    the strike-free (term-basis) one.
    """

    w: float
    a: float
    pref: float

    def values(self, lam: np.ndarray) -> np.ndarray:
        il = 1j * lam
        return (self.pref * np.exp(1j * self.a * lam)
                / ((self.w + il) * (self.w - 1.0 + il)))

    def tail(self, edge: float, lam_n: float, w_n: complex, z: complex):
        s = z + 1j * self.a
        if s.real > 1e-13:
            return None
        pref = self.pref * w_n * np.exp(-z * lam_n)
        if abs(s) * (edge + abs(self.w) + 1.0) < 1e-9:
            # s ~ 0: the two exp1 terms degenerate; use the exact
            # log-ratio primitive of the bare kernel instead
            base = 1j * np.log((self.w - 1.0 + 1j * edge) / (self.w + 1j * edge))
            return pref * base

        def part(c):
            return -1j * np.exp(1j * s * c) * exp1(-s * (edge - 1j * c))

        return pref * (part(self.w - 1.0) - part(self.w))


@dataclass(frozen=True)
class GilPelaezKernel:
    """e^{-i x zeta} / zeta weight of the tail-probability inversion."""

    x: float

    def values(self, lam: np.ndarray) -> np.ndarray:
        return np.exp(-1j * self.x * lam) / lam

    def tail(self, edge: float, lam_n: float, w_n: complex, z: complex):
        s = z - 1j * self.x
        if s.real > 1e-13 or abs(s) * edge < 1e-12:
            return None          # cannot certify a logarithmically slow tail
        return w_n * np.exp(-z * lam_n) * exp1(-s * edge)


def _panel_edges(cfg: QuadratureConfig, freq_hint: float):
    """Geometric panel edges with an oscillation-aware width cap."""
    cap = max(8.0, cfg.n_nodes / (2.0 * max(freq_hint, 1e-12)))
    if cfg.scheme == "trapezoid":
        width = min(cap, cfg.lambda_max)
        lo = 0.0
        while lo < cfg.lambda_max:
            hi = min(lo + width, cfg.lambda_max)
            yield lo, hi
            lo = hi
        return
    width = 8.0
    lo = 0.0
    while lo < cfg.lambda_max:
        hi = min(lo + min(width, cap), cfg.lambda_max)
        yield lo, hi
        lo = hi
        width *= 2.0


def _panel_rule(cfg: QuadratureConfig, lo: float, hi: float):
    if cfg.scheme == "trapezoid":
        lam = np.linspace(lo, hi, cfg.n_nodes)
        wts = np.full(cfg.n_nodes, (hi - lo) / (cfg.n_nodes - 1))
        wts[0] *= 0.5
        wts[-1] *= 0.5
        if lo == 0.0:
            lam = lam[1:]           # kernels with a 1/lambda factor
            wts = wts[1:]
        return lam, wts
    xg, wg = _gl_rule(cfg.n_nodes)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return mid + half * xg, half * wg


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n: int):
    rule = _GL_CACHE.get(n)
    if rule is None:
        rule = roots_legendre(n)
        _GL_CACHE[n] = rule
    return rule


def integrate_halfline(w_fn, kernels, cfg: QuadratureConfig, freq_hint: float):
    """Half-line totals of ``W * kern`` for one or more kernels.

    ``w_fn(lam)`` returns the transform values on a node batch; kernels
    share the node grid.  Returns ``[(total, diagnostics), ...]`` where
    ``total`` is the complex half-line integral including the analytic
    tail correction; the symmetric full-line value is ``2 * Re(total)``.

    Raises :class:`QuadratureFailure` when any kernel's total has not
    stabilized within the truncation cap.
    """
    kernels = list(kernels)
    nk = len(kernels)
    partials = np.zeros(nk, dtype=complex)
    prev_totals = None
    totals = np.zeros(nk, dtype=complex)
    tail_mag = np.full(nk, np.inf)
    converged = np.zeros(nk, dtype=bool)
    streak = np.zeros(nk, dtype=int)
    node_scale = np.zeros(nk)
    n_nodes_used = 0
    edge_used = 0.0
    sym_lam: list[float] = []                 # one probe node per panel
    sym_wts: list[float] = []
    sym_fplus: list[np.ndarray] = []          # f(+lam) per kernel at the probe
    mirror_sum = np.zeros(nk, dtype=complex) if cfg.mirror else None

    panels = list(_panel_edges(cfg, freq_hint))
    chunk = 4
    idx = 0
    while idx < len(panels):
        group = panels[idx:idx + chunk]
        idx += len(group)
        lam_all, wts_all, splits = [], [], [0]
        for lo, hi in group:
            lam, wts = _panel_rule(cfg, lo, hi)
            lam_all.append(lam)
            wts_all.append(wts)
            splits.append(splits[-1] + len(lam))
        lam_all = np.concatenate(lam_all)
        wts_all = np.concatenate(wts_all)
        w_vals = np.asarray(w_fn(lam_all))
        if cfg.mirror:
            w_mirror = np.asarray(w_fn(-lam_all))
        n_nodes_used += len(lam_all)
        kern_vals = [k.values(lam_all) for k in kernels]
        f_vals = [w_vals * kv for kv in kern_vals]
        for g, (lo, hi) in enumerate(group):
            sl = slice(splits[g], splits[g + 1])
            lam_p = lam_all[sl]
            wts_p = wts_all[sl]
            edge_used = hi
            # log-linear extrapolation of W from the last two nodes
            w1, w2 = w_vals[sl][-2], w_vals[sl][-1]
            lam1, lam2 = lam_p[-2], lam_p[-1]
            z = None
            decayed = abs(w2) == 0.0      # transform underflowed: tail is gone
            if not decayed and w1 != 0:
                z = np.log(w2 / w1) / (lam2 - lam1)
            for kidx, kern in enumerate(kernels):
                fp = f_vals[kidx][sl]
                partials[kidx] += fp @ wts_p
                node_scale[kidx] = max(node_scale[kidx],
                                       float(np.max(np.abs(fp))))
                if decayed:
                    tail = 0.0 + 0.0j
                else:
                    tail = kern.tail(hi, lam2, w2, z) if z is not None else None
                if tail is None:
                    totals[kidx] = partials[kidx]
                    tail_mag[kidx] = np.inf
                else:
                    totals[kidx] = partials[kidx] + tail
                    tail_mag[kidx] = abs(tail)
            if cfg.mirror:
                for kidx, kern in enumerate(kernels):
                    mirror_sum[kidx] += (w_mirror[sl] * kern.values(-lam_p)) @ wts_p
            else:
                j = int(np.argmax(np.abs(f_vals[0][sl])))
                sym_lam.append(float(lam_p[j]))
                sym_wts.append(float(wts_p[j]))
                sym_fplus.append(np.array([f_vals[kidx][sl][j]
                                           for kidx in range(nk)]))
            if prev_totals is not None:
                delta = np.abs(totals - prev_totals)
                floor = 32 * np.finfo(float).eps * node_scale * max(
                    np.sqrt(n_nodes_used), 1.0)
                ok = delta <= np.maximum(cfg.rel_tol * np.abs(totals), floor)
                streak = np.where(ok, streak + 1, 0)
                converged = streak >= 2
            prev_totals = totals.copy()
        if np.all(converged) and idx >= 3:
            break

    if not np.all(converged):
        worst = int(np.argmin(streak))
        raise QuadratureFailure(
            f"integral not converged by lambda_max={edge_used:g} "
            f"(tail estimate {tail_mag[worst]:.3g}, "
            f"last delta vs rel_tol {cfg.rel_tol:g})")

    # conjugate-symmetry residual
    results = []
    if cfg.mirror:
        for kidx in range(nk):
            full = partials[kidx] + mirror_sum[kidx]
            imag_res = abs(full.imag)
            diag = QuadDiagnostics(lambda_max=edge_used, n_nodes=2 * n_nodes_used,
                                   tail_estimate=tail_mag[kidx], converged=True,
                                   imag_residual=imag_res)
            results.append((totals[kidx], diag))
        return results

    # one probe node per panel, mirrored in an independent solve: estimates the
    # conjugate-symmetry defect of the whole integral by weight extrapolation
    lam_sub = np.array(sym_lam)
    wts_sub = np.array(sym_wts)
    w_minus = np.asarray(w_fn(-lam_sub))
    fplus = np.array(sym_fplus)                        # (n_panels, nk)
    covered = float(np.sum(wts_sub))
    scale = edge_used / max(covered, 1e-300)
    for kidx, kern in enumerate(kernels):
        f_minus = w_minus * kern.values(-lam_sub)
        defect = float(np.sum(wts_sub * (fplus[:, kidx] + f_minus).imag))
        diag = QuadDiagnostics(lambda_max=edge_used, n_nodes=n_nodes_used,
                               tail_estimate=tail_mag[kidx], converged=True,
                               imag_residual=abs(defect) * scale)
        results.append((totals[kidx], diag))
    return results
