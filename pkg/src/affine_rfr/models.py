"""Affine short-rate model specifications and their functional characteristics.

A model lives on the state space ``D = R_+^m x R^n`` and is described by a
set of admissible parameters ``(alpha, beta, mu, Lambda)``:

* ``alpha[i]`` (``i = 0..d``) are symmetric ``d x d`` diffusion matrices,
* ``beta[i]`` are drift vectors,
* ``mu[i]`` are jump descriptors (here: exponential marks on one of the
  first ``m`` coordinates, or none),
* ``Lambda`` is the short-rate loading, ``r_t = ell(t) + <Lambda, X_t>``.

The functions ``F`` and ``R`` evaluated here are of Levy-Khintchine type,

    F(u)   = <alpha[0] u, u> + <beta[0], u> + J_0(u)
    R_i(u) = <alpha[i] u, u> + <beta[i], u> + J_i(u),   i = 1..d

with jump transforms ``J_i(u) = intensity * u_c / (rate - u_c)`` for an
exponential jump on coordinate ``c``.  The truncation function is taken
to be zero throughout: all jump measures in the catalog have a finite
first moment and compensation is absorbed into the drift vectors.

The effective real domain of F and R is

    Y = { y in R^d : y_c < rate  for every active jump },

i.e. all of R^d for continuous models.  Interior membership is reported
through :class:`DomainProbe` with a boundary margin.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainViolation, NonAdmissible

CATALOG_FAMILIES = ("Vasicek", "CIR", "CIRExpJumps", "TwoFactorCIROU", "Deterministic")


@dataclass(frozen=True)
class ExponentialJump:
    """Compound-Poisson jump with Exp(rate) marks on one R_+ coordinate.

    ``intensity`` is the arrival rate per unit time (for index 0) or per
    unit of the driving coordinate (for indices 1..m).  Mean jump size is
    ``1/rate``.
    """

    intensity: float
    rate: float
    coord: int

    def transform(self, u_c: np.ndarray | complex) -> np.ndarray | complex:
        """Closed form of ``intensity * int (e^{u xi} - 1) rate e^{-rate xi} dxi``."""
        return self.intensity * u_c / (self.rate - u_c)

    def mean_contribution(self) -> float:
        """First moment ``intensity / rate`` entering linear drifts."""
        return self.intensity / self.rate


@dataclass(frozen=True)
class DomainProbe:
    """Membership report for the real domain Y.

    ``margin > 0`` iff the point lies in the interior of Y; for jump-free
    models the margin is ``+inf``.
    """

    point: np.ndarray
    margin: float

    @property
    def interior(self) -> bool:
        return self.margin > 0.0


@dataclass(frozen=True)
class AffineModelSpec:
    """Immutable affine model on ``R_+^m x R^n``.

    Instances are validated on construction and hashable via a stable
    digest of their parameters, which keys the Riccati memo caches.
    """

    m: int
    n: int
    alpha: np.ndarray          # (d+1, d, d)
    beta: np.ndarray           # (d+1, d)
    jumps: tuple[ExponentialJump | None, ...]
    Lambda: np.ndarray         # (d,)
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        d = self.m + self.n
        alpha = np.asarray(self.alpha,
                           dtype=float).reshape(d + 1, d, d).copy()
        beta = np.asarray(self.beta, dtype=float).reshape(d + 1, d).copy()
        lam = np.asarray(self.Lambda, dtype=float).reshape(d).copy()
        for a in (alpha, beta, lam):
            a.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "Lambda", lam)
        jumps = tuple(self.jumps)
        if len(jumps) != d + 1:
            raise NonAdmissible(f"expected {d + 1} jump slots, got {len(jumps)}")
        object.__setattr__(self, "jumps", jumps)
        self._validate()
        digest = hashlib.sha1()
        digest.update(f"{self.m},{self.n},{self.family}".encode())
        digest.update(alpha.tobytes())
        digest.update(beta.tobytes())
        digest.update(lam.tobytes())
        for j in jumps:
            if j is not None:
                digest.update(np.float64([j.intensity, j.rate, j.coord]).tobytes())
        object.__setattr__(self, "_key", digest.hexdigest())
        # flat jump layout consumed by the compiled Riccati kernel
        active = [(slot, j) for slot, j in enumerate(jumps) if j is not None]
        jump_flat = (
            np.array([s for s, _ in active], dtype=np.int64),
            np.array([j.coord for _, j in active], dtype=np.int64),
            np.array([j.intensity for _, j in active], dtype=np.float64),
            np.array([j.rate for _, j in active], dtype=np.float64),
        )
        object.__setattr__(self, "_jump_flat", jump_flat)

    # -- structural admissibility -------------------------------------

    def _validate(self) -> None:
        m, n, d = self.m, self.n, self.d
        if m < 0 or n < 0 or d == 0:
            raise NonAdmissible("need m >= 0, n >= 0 and m + n >= 1")
        I = range(m)
        J = range(m, d)
        for i in range(d + 1):
            a = self.alpha[i]
            if not np.allclose(a, a.T):
                raise NonAdmissible(f"alpha[{i}] is not symmetric")
        # alpha[0]: diffusion may only act on the J-block
        for r in range(d):
            for c in range(d):
                if self.alpha[0][r, c] != 0.0 and not (r in J and c in J):
                    raise NonAdmissible("alpha[0] must be supported on the R^n block")
        # alpha[i], i in I: (i,i) entry plus the J-block
        for i in I:
            a = self.alpha[i + 1]
            allowed = {(i, i)} | {(r, c) for r in J for c in J}
            allowed |= {(i, c) for c in J} | {(r, i) for r in J}
            bad = [(r, c) for r in range(d) for c in range(d)
                   if a[r, c] != 0.0 and (r, c) not in allowed]
            if bad:
                raise NonAdmissible(f"alpha[{i + 1}] has entries outside the admissible pattern")
        # alpha[j], j in J: no state-dependent diffusion from signed coordinates
        for j in J:
            if np.any(self.alpha[j + 1] != 0.0):
                raise NonAdmissible("alpha must vanish for R^n coordinates")
        # beta keeps R_+^m invariant
        for i in I:
            if self.beta[0][i] < 0.0:
                raise NonAdmissible("constant drift must be nonnegative on R_+^m")
            for k in range(d):
                if k == i:
                    continue
                if k in I and self.beta[k + 1][i] < 0.0:
                    raise NonAdmissible("cross drift on R_+^m must be nonnegative")
                if k in J and self.beta[k + 1][i] != 0.0:
                    raise NonAdmissible("signed coordinates may not drive R_+^m drift")
        # jumps: only on the first m coordinates, only mu_0..mu_m, finite
        for idx, jump in enumerate(self.jumps):
            if jump is None:
                continue
            if idx > m:
                raise NonAdmissible("jump measures must vanish for R^n coordinates")
            if not (0 <= jump.coord < m):
                raise NonAdmissible("jump marks must land on an R_+^m coordinate")
            if jump.intensity <= 0.0:
                raise NonAdmissible("jump intensity must be positive")
            if jump.rate <= 0.0:
                # rate > 0 is exactly the requirement 0 in interior(Y)
                raise NonAdmissible("jump decay rate must be strictly positive")

    # -- basic properties ----------------------------------------------

    @property
    def d(self) -> int:
        return self.m + self.n

    @property
    def is_gaussian(self) -> bool:
        """True when the state has no R_+^m block (pure OU dynamics)."""
        return self.m == 0

    @property
    def is_deterministic(self) -> bool:
        return (not np.any(self.alpha) and not np.any(self.beta)
                and all(j is None for j in self.jumps))

    def active_jumps(self) -> list[ExponentialJump]:
        return [j for j in self.jumps if j is not None]

    def jump_arrays(self):
        """(slot, coord, intensity, rate) arrays for the compiled kernel."""
        return self._jump_flat

    def key(self) -> str:
        """Stable content hash used for memoization."""
        return self._key

    # -- characteristic function machinery ------------------------------

    def domain_margin(self, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float).reshape(self.d)
        margin = np.inf
        for j in self.active_jumps():
            margin = min(margin, j.rate - y[j.coord])
        return margin

    def _jump_terms(self, U: np.ndarray) -> np.ndarray:
        """Jump transforms for a batch ``U`` of shape (k, d) -> (k, d+1)."""
        out = np.zeros((U.shape[0], self.d + 1), dtype=complex)
        for idx, jump in enumerate(self.jumps):
            if jump is not None:
                out[:, idx] = jump.transform(U[:, jump.coord])
        return out

    def F_batch(self, U: np.ndarray) -> np.ndarray:
        """F on a batch of points, shape (k, d) -> (k,); no domain check."""
        quad = np.einsum("jk,nj,nk->n", self.alpha[0], U, U)
        lin = U @ self.beta[0]
        return quad + lin + self._jump_terms(U)[:, 0]

    def R_batch(self, U: np.ndarray) -> np.ndarray:
        """R on a batch of points, shape (k, d) -> (k, d); no domain check."""
        quad = np.einsum("ajk,nj,nk->na", self.alpha[1:], U, U)
        lin = U @ self.beta[1:].T
        return quad + lin + self._jump_terms(U)[:, 1:]

    def FR_batch(self, U: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(F, R) evaluated together; one pass for the Riccati right-hand side."""
        quad = np.einsum("ajk,nj,nk->na", self.alpha, U, U)
        lin = U @ self.beta.T
        terms = quad + lin + self._jump_terms(U)
        return terms[:, 0], terms[:, 1:]

    # -- serialization ---------------------------------------------------

    def to_json(self) -> str:
        if self.family not in CATALOG_FAMILIES:
            raise ValueError("only catalog models serialize to JSON")
        return json.dumps({"family": self.family, "params": dict(self.params)},
                          sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "AffineModelSpec":
        doc = json.loads(text)
        return build_catalog_model(doc["family"], doc.get("params", {}))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _require(params: Mapping[str, float], *names: str) -> list[float]:
    missing = [k for k in names if k not in params]
    if missing:
        raise NonAdmissible(f"missing parameters: {', '.join(missing)}")
    return [float(params[k]) for k in names]


def build_catalog_model(name: str, params: Mapping[str, float] | None = None) -> AffineModelSpec:
    """Instantiate one of the catalog families.

    Families and parameters:

    * ``Vasicek``:        kappa, sigma               (m=0, n=1)
    * ``CIR``:            kappa, theta, sigma        (m=1, n=0)
    * ``CIRExpJumps``:    kappa, theta, sigma, jump_intensity, jump_rate
    * ``TwoFactorCIROU``: cir_kappa, cir_theta, cir_sigma, ou_kappa, ou_sigma
    * ``Deterministic``:  (no parameters; zero model with Lambda = 0)

    Raises :class:`NonAdmissible` when a positivity constraint fails.
    """
    params = dict(params or {})
    fam = {f.lower(): f for f in CATALOG_FAMILIES}.get(str(name).lower())
    if fam is None:
        raise NonAdmissible(f"unknown model family {name!r}")

    if fam == "Vasicek":
        kappa, sigma = _require(params, "kappa", "sigma")
        if sigma <= 0.0:
            raise NonAdmissible("sigma must be positive")
        if kappa < 0.0:
            raise NonAdmissible("kappa must be nonnegative")
        return AffineModelSpec(
            m=0, n=1,
            alpha=[[[0.5 * sigma ** 2]], [[0.0]]],
            beta=[[0.0], [-kappa]],
            jumps=(None, None),
            Lambda=[1.0],
            family=fam, params=params)

    if fam in ("CIR", "CIRExpJumps"):
        kappa, theta, sigma = _require(params, "kappa", "theta", "sigma")
        if sigma <= 0.0:
            raise NonAdmissible("sigma must be positive")
        if kappa < 0.0:
            raise NonAdmissible("kappa must be nonnegative")
        if theta < 0.0:
            raise NonAdmissible("theta must be nonnegative")
        jumps: tuple[ExponentialJump | None, ...] = (None, None)
        if fam == "CIRExpJumps":
            lam_j, gamma = _require(params, "jump_intensity", "jump_rate")
            if lam_j <= 0.0:
                raise NonAdmissible("jump_intensity must be positive")
            if gamma <= 0.0:
                raise NonAdmissible("jump_rate must be strictly positive")
            jumps = (ExponentialJump(lam_j, gamma, 0), None)
        return AffineModelSpec(
            m=1, n=0,
            alpha=[[[0.0]], [[0.5 * sigma ** 2]]],
            beta=[[kappa * theta], [-kappa]],
            jumps=jumps,
            Lambda=[1.0],
            family=fam, params=params)

    if fam == "TwoFactorCIROU":
        ck, ct, cs, ok, os_ = _require(params, "cir_kappa", "cir_theta",
                                       "cir_sigma", "ou_kappa", "ou_sigma")
        if cs <= 0.0 or os_ <= 0.0:
            raise NonAdmissible("sigma must be positive")
        if ck < 0.0 or ok < 0.0:
            raise NonAdmissible("kappa must be nonnegative")
        if ct < 0.0:
            raise NonAdmissible("theta must be nonnegative")
        zero = np.zeros((2, 2))
        a0 = np.array([[0.0, 0.0], [0.0, 0.5 * os_ ** 2]])
        a1 = np.array([[0.5 * cs ** 2, 0.0], [0.0, 0.0]])
        return AffineModelSpec(
            m=1, n=1,
            alpha=[a0, a1, zero],
            beta=[[ck * ct, 0.0], [-ck, 0.0], [0.0, -ok]],
            jumps=(None, None, None),
            Lambda=[1.0, 1.0],
            family=fam, params=params)

    # Deterministic: zero dynamics, short rate reduces to ell(t)
    return AffineModelSpec(
        m=0, n=1,
        alpha=[[[0.0]], [[0.0]]],
        beta=[[0.0], [0.0]],
        jumps=(None, None),
        Lambda=[0.0],
        family=fam, params=params)


def deterministic_model() -> AffineModelSpec:
    """Zero-volatility model: the short rate equals the shift ell(t)."""
    return build_catalog_model("Deterministic", {})


def domain_contains(model: AffineModelSpec, y: np.ndarray) -> DomainProbe:
    """Probe membership of a real point in the domain Y.

    The margin is the distance to the nearest jump-decay boundary, +inf
    when the model has no jumps (then Y is all of R^d).
    """
    y = np.asarray(y, dtype=float).reshape(model.d)
    return DomainProbe(point=y, margin=model.domain_margin(y))


def _check_domain(model: AffineModelSpec, u: np.ndarray) -> None:
    margin = model.domain_margin(np.real(u))
    if margin <= 0.0:
        raise DomainViolation(
            f"Re(u) outside the interior of Y (margin {margin:g})",
            assumption="Re(u) in interior(Y)")


def eval_F(model: AffineModelSpec, u) -> complex:
    """Evaluate F at a complex point with Re(u) in the interior of Y."""
    U = np.asarray(u, dtype=complex).reshape(1, model.d)
    _check_domain(model, U[0])
    return complex(model.F_batch(U)[0])


def eval_R(model: AffineModelSpec, u) -> np.ndarray:
    """Evaluate R componentwise at a complex point, Re(u) in interior(Y)."""
    U = np.asarray(u, dtype=complex).reshape(1, model.d)
    _check_domain(model, U[0])
    return model.R_batch(U)[0]
