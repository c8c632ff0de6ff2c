"""Core types for near-integrable Hamiltonians with slow time dependence.

The systems handled here have the form

    H(theta, I, t) = h(I) + eps * f(theta, I, eps**c * t)

with angles theta on the unit torus T^n = R^n / Z^n (period 1, so every
trigonometric evaluation carries an explicit 2*pi), actions I in a ball of
radius ``rho``, and a perturbation f given as a finite Fourier sum in theta
whose coefficients are polynomials in I modulated by smooth bounded
envelopes in the slow time argument tau = eps**c * t.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "reduce_angles",
    "angle_distance",
    "MultiPoly",
    "State",
    "IntegrableH",
    "PowerLaw",
    "QuadraticForm",
    "PolynomialH",
    "Envelope",
    "Mode",
    "Perturbation",
    "SlowSystem",
    "MechanicalSystem",
    "system_to_dict",
    "system_from_dict",
    "system_dumps",
    "system_loads",
    "mechanical_to_dict",
    "mechanical_from_dict",
]

TWO_PI = 2.0 * math.pi

# Number of sample points (and the safety factor) used when bounding the
# Hessian of a general polynomial integrable part by sampling.
_HESS_SAMPLES = 10_000
_HESS_SAFETY = 1.5


def reduce_angles(theta: np.ndarray) -> np.ndarray:
    """Reduce angle coordinates to the fundamental domain [0, 1)^n.

    Idempotent; values that round up to 1.0 after the modulo are mapped
    back to 0.0 so the result is always strictly below 1.
    """
    out = np.asarray(theta, dtype=float) % 1.0
    out = np.where(out >= 1.0, 0.0, out)
    return out


def angle_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max-norm distance between two angle vectors on the unit torus."""
    d = np.abs(reduce_angles(a) - reduce_angles(b))
    return float(np.max(np.minimum(d, 1.0 - d), initial=0.0))


def stream_rng(*words) -> np.random.Generator:
    """Deterministic counter-based RNG for a tuple of small integer labels.

    Packs up to four 32-bit labels into the 128-bit Philox key, giving
    independent, reproducible streams for (seed, cell, ...) addressing.
    """
    if not 1 <= len(words) <= 4:
        raise ValueError("stream_rng takes between 1 and 4 integer labels")
    w = [int(v) & 0xFFFFFFFF for v in words] + [0] * (4 - len(words))
    key = [(w[0] << 32) | w[1], (w[2] << 32) | w[3]]
    return np.random.Generator(np.random.Philox(key=key))


def _as_vector(x, n: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise ValueError(f"{name} has dimension {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class MultiPoly:
    """Real polynomial in n variables, stored as multi-index terms.

    ``exponents`` is an (m, n) array of non-negative integers and
    ``coefficients`` the matching m real coefficients.
    """

    exponents: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        exps = np.atleast_2d(np.asarray(self.exponents, dtype=np.int64))
        coefs = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if exps.shape[0] != coefs.shape[0]:
            raise ValueError("exponent rows and coefficients must match")
        if np.any(exps < 0):
            raise ValueError("exponents must be non-negative")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "coefficients", coefs)

    @property
    def dimension(self) -> int:
        return self.exponents.shape[1]

    @classmethod
    def constant(cls, value: float, dimension: int) -> "MultiPoly":
        return cls(np.zeros((1, dimension), dtype=np.int64), np.array([float(value)]))

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.exponents == 0))

    def value(self, x: np.ndarray) -> float:
        x = _as_vector(x, self.dimension, "point")
        return float(np.sum(self.coefficients * np.prod(x ** self.exponents, axis=1)))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = _as_vector(x, self.dimension, "point")
        g = np.zeros(self.dimension)
        for alpha, c in zip(self.exponents, self.coefficients):
            for i in range(self.dimension):
                if alpha[i] == 0:
                    continue
                a = alpha.copy()
                a[i] -= 1
                g[i] += c * alpha[i] * np.prod(x**a)
        return g

    def hess(self, x: np.ndarray) -> np.ndarray:
        x = _as_vector(x, self.dimension, "point")
        n = self.dimension
        hmat = np.zeros((n, n))
        for alpha, c in zip(self.exponents, self.coefficients):
            for i in range(n):
                if alpha[i] == 0:
                    continue
                for j in range(n):
                    a = alpha.copy()
                    a[i] -= 1
                    fac = c * alpha[i]
                    if a[j] == 0:
                        continue
                    fac *= a[j]
                    a[j] -= 1
                    hmat[i, j] += fac * np.prod(x**a)
        return hmat

    def sup_bound(self, radius: float) -> float:
        """Upper bound of |poly| over the max-norm ball of the given radius."""
        degs = np.sum(self.exponents, axis=1)
        return float(np.sum(np.abs(self.coefficients) * float(radius) ** degs))

    def to_terms(self) -> list[dict]:
        return [
            {"alpha": [int(a) for a in alpha], "coeff": float(c)}
            for alpha, c in zip(self.exponents, self.coefficients)
        ]

    @classmethod
    def from_terms(cls, terms: Sequence[dict], dimension: int) -> "MultiPoly":
        if not terms:
            return cls.constant(0.0, dimension)
        exps = np.array([t["alpha"] for t in terms], dtype=np.int64)
        coefs = np.array([t["coeff"] for t in terms], dtype=float)
        if exps.shape[1] != dimension:
            raise ValueError("polynomial term dimension mismatch")
        return cls(exps, coefs)


@dataclass(frozen=True)
class State:
    """Phase-space sample (theta, I) at a time; angles are not auto-reduced."""

    theta: np.ndarray
    action: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        th = _as_vector(self.theta, None, "theta")
        ac = _as_vector(self.action, th.shape[0], "action")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "action", ac)

    @property
    def dimension(self) -> int:
        return self.theta.shape[0]

    def reduced(self) -> "State":
        return State(reduce_angles(self.theta), self.action, self.time)


class IntegrableH:
    """Integrable part h(I); concrete variants implement value/grad/hess.

    Every variant carries ``dimension``, a working action-ball radius
    ``radius``, and a Hessian operator-norm bound ``hessian_bound`` valid on
    that ball.
    """

    dimension: int
    radius: float
    hessian_bound: float

    def value(self, action: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hess(self, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _check_radius(radius: float) -> float:
    radius = float(radius)
    if not radius > 0.0:
        raise ValueError("radius must be positive")
    return radius


@dataclass(frozen=True)
class PowerLaw(IntegrableH):
    """h(I) = I_1**p + ... + I_n**p for an integer p >= 2."""

    p: int
    dimension: int
    radius: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("power-law exponent p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        object.__setattr__(self, "radius", _check_radius(self.radius))

    @property
    def hessian_bound(self) -> float:
        p = self.p
        return p * (p - 1) * self.radius ** (p - 2)

    def value(self, action) -> float:
        a = _as_vector(action, self.dimension, "action")
        return float(np.sum(a**self.p))

    def grad(self, action) -> np.ndarray:
        a = _as_vector(action, self.dimension, "action")
        return self.p * a ** (self.p - 1)

    def hess(self, action) -> np.ndarray:
        a = _as_vector(action, self.dimension, "action")
        return np.diag(self.p * (self.p - 1) * a ** (self.p - 2))


@dataclass(frozen=True)
class QuadraticForm(IntegrableH):
    """h(I) = I . A I for a symmetric matrix A."""

    matrix: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValueError("quadratic form matrix must be square")
        if not np.allclose(a, a.T, rtol=0.0, atol=1e-12):
            raise ValueError("quadratic form matrix must be symmetric (tol 1e-12)")
        object.__setattr__(self, "matrix", 0.5 * (a + a.T))
        object.__setattr__(self, "radius", _check_radius(self.radius))

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def hessian_bound(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvalsh(2.0 * self.matrix))))

    def value(self, action) -> float:
        a = _as_vector(action, self.dimension, "action")
        return float(a @ self.matrix @ a)

    def grad(self, action) -> np.ndarray:
        a = _as_vector(action, self.dimension, "action")
        return 2.0 * self.matrix @ a

    def hess(self, action) -> np.ndarray:
        _as_vector(action, self.dimension, "action")
        return 2.0 * self.matrix


@dataclass(frozen=True)
class PolynomialH(IntegrableH):
    """General polynomial integrable part given by multi-index terms.

    The Hessian bound is estimated by sampling the operator norm at
    ``_HESS_SAMPLES`` points of the action ball (fixed RNG stream, so the
    estimate is deterministic) and multiplying by a safety factor.
    """

    poly: MultiPoly
    radius: float = 1.0
    _bound: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        if not isinstance(self.poly, MultiPoly):
            object.__setattr__(self, "poly", MultiPoly(*self.poly))
        object.__setattr__(self, "radius", _check_radius(self.radius))
        object.__setattr__(self, "_bound", self._sample_hessian_bound())

    @property
    def dimension(self) -> int:
        return self.poly.dimension

    @property
    def hessian_bound(self) -> float:
        return self._bound

    def _sample_hessian_bound(self) -> float:
        rng = np.random.Generator(np.random.Philox(key=0))
        n = self.dimension
        pts = rng.normal(size=(_HESS_SAMPLES, n))
        norms = np.linalg.norm(pts, axis=1)
        radii = self.radius * rng.uniform(size=_HESS_SAMPLES) ** (1.0 / n)
        pts = pts * (radii / np.where(norms == 0.0, 1.0, norms))[:, None]
        worst = 0.0
        for x in pts:
            hmat = self.poly.hess(x)
            worst = max(worst, float(np.linalg.norm(hmat, 2)))
        return _HESS_SAFETY * worst

    def value(self, action) -> float:
        return self.poly.value(_as_vector(action, self.dimension, "action"))

    def grad(self, action) -> np.ndarray:
        return self.poly.grad(_as_vector(action, self.dimension, "action"))

    def hess(self, action) -> np.ndarray:
        return self.poly.hess(_as_vector(action, self.dimension, "action"))


_ENVELOPE_KINDS = ("constant", "cosine", "sech", "ramp")
# numeric codes shared with the compiled kernels
ENVELOPE_CODES = {kind: i for i, kind in enumerate(_ENVELOPE_KINDS)}


@dataclass(frozen=True)
class Envelope:
    """Bounded smooth slow-time envelope e(tau) with |e| <= 1.

    Kinds
    -----
    constant : e(tau) = 1
    cosine   : e(tau) = cos(2*pi*param*tau)        (param = frequency)
    sech     : e(tau) = 1/cosh(tau/param)          (param = width > 0)
    ramp     : e(tau) = tanh(param*tau)            (param = rate > 0)
    """

    kind: str = "constant"
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in _ENVELOPE_KINDS:
            raise ValueError(f"unknown envelope kind {self.kind!r}; expected one of {_ENVELOPE_KINDS}")
        object.__setattr__(self, "param", float(self.param))
        if self.kind in ("sech", "ramp") and not self.param > 0.0:
            raise ValueError(f"{self.kind} envelope requires a positive parameter")

    def value(self, tau: float) -> float:
        if self.kind == "constant":
            return 1.0
        if self.kind == "cosine":
            return math.cos(TWO_PI * self.param * tau)
        if self.kind == "sech":
            return 1.0 / math.cosh(tau / self.param)
        return math.tanh(self.param * tau)

    def derivative(self, tau: float) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "cosine":
            return -TWO_PI * self.param * math.sin(TWO_PI * self.param * tau)
        if self.kind == "sech":
            u = tau / self.param
            return -math.tanh(u) / (math.cosh(u) * self.param)
        u = self.param * tau
        return self.param / math.cosh(u) ** 2


@dataclass(frozen=True)
class Mode:
    """One Fourier mode: c_k(I) * e(tau) * cos(2*pi*(k . theta + phase))."""

    wavevector: np.ndarray
    coeffs: MultiPoly
    phase: float = 0.0
    envelope: Envelope = Envelope()

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.wavevector))
        if k.ndim != 1:
            raise ValueError("wavevector must be one-dimensional")
        if not np.all(k == np.round(k)):
            raise ValueError("wavevector entries must be integers")
        object.__setattr__(self, "wavevector", k.astype(np.int64))
        if np.all(self.wavevector == 0):
            raise ValueError("wavevector must be non-zero")
        if not isinstance(self.coeffs, MultiPoly):
            object.__setattr__(self, "coeffs", MultiPoly(*self.coeffs))
        if self.coeffs.dimension != self.wavevector.shape[0]:
            raise ValueError("coefficient polynomial dimension must match wavevector")
        object.__setattr__(self, "phase", float(self.phase) % 1.0)

    @classmethod
    def simple(cls, wavevector, amplitude: float = 1.0, phase: float = 0.0,
               envelope: Envelope = Envelope()) -> "Mode":
        """Mode with an action-independent amplitude."""
        k = np.atleast_1d(np.asarray(wavevector))
        return cls(k, MultiPoly.constant(amplitude, k.shape[0]), phase, envelope)

    @property
    def dimension(self) -> int:
        return self.wavevector.shape[0]

    @property
    def is_action_independent(self) -> bool:
        return self.coeffs.is_constant


@dataclass(frozen=True)
class Perturbation:
    """Finite Fourier-polynomial perturbation f(theta, I, tau).

    f = (1/scale) * sum_k c_k(I) * e_k(tau) * cos(2*pi*(k . theta + phi_k))

    ``scale`` is the positive normalization divisor; ``normalized`` returns a
    copy whose scale makes the l1 sup-norm estimate exactly 1.
    """

    modes: tuple[Mode, ...]
    scale: float = 1.0

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise ValueError("perturbation requires at least one mode")
        n = modes[0].dimension
        for m in modes:
            if m.dimension != n:
                raise ValueError("all modes must share the same dimension")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")

    @property
    def dimension(self) -> int:
        return self.modes[0].dimension

    @property
    def is_action_independent(self) -> bool:
        return all(m.is_action_independent for m in self.modes)

    def sup_norm_estimate(self, action_radius: float) -> float:
        """l1 upper bound for sup |f| over the action ball (envelopes <= 1)."""
        total = sum(m.coeffs.sup_bound(action_radius) for m in self.modes)
        return total / self.scale

    def normalized(self, action_radius: float) -> "Perturbation":
        """Copy rescaled so the sup-norm estimate at this radius is exactly 1."""
        raw = sum(m.coeffs.sup_bound(action_radius) for m in self.modes)
        if raw == 0.0:
            raise ValueError("cannot normalize an identically zero perturbation")
        return replace(self, scale=raw)

    def value(self, theta, action, tau: float) -> float:
        theta = _as_vector(theta, self.dimension, "theta")
        action = _as_vector(action, self.dimension, "action")
        total = 0.0
        for m in self.modes:
            psi = TWO_PI * (float(m.wavevector @ theta) + m.phase)
            total += m.coeffs.value(action) * m.envelope.value(tau) * math.cos(psi)
        return total / self.scale

    def derivatives(self, theta, action, tau: float):
        """Value plus first derivatives.

        Returns
        -------
        (f, df_dtheta, df_daction, df_dtau)
            f : float, the perturbation value
            df_dtheta : (n,) array
            df_daction : (n,) array
            df_dtau : float
        """
        theta = _as_vector(theta, self.dimension, "theta")
        action = _as_vector(action, self.dimension, "action")
        n = self.dimension
        f = 0.0
        ftheta = np.zeros(n)
        faction = np.zeros(n)
        ftau = 0.0
        for m in self.modes:
            psi = TWO_PI * (float(m.wavevector @ theta) + m.phase)
            cos_psi = math.cos(psi)
            sin_psi = math.sin(psi)
            c = m.coeffs.value(action)
            e = m.envelope.value(tau)
            f += c * e * cos_psi
            ftheta += -TWO_PI * c * e * sin_psi * m.wavevector
            faction += m.coeffs.grad(action) * e * cos_psi
            ftau += c * m.envelope.derivative(tau) * cos_psi
        s = self.scale
        return f / s, ftheta / s, faction / s, ftau / s

    def second_derivatives(self, theta, action, tau: float):
        """Second-derivative blocks (d2_thth, d2_ac_th, d2_acac).

        ``d2_ac_th[i, j]`` is d^2 f / dI_i dtheta_j; the theta-theta and
        action-action blocks are symmetric. Used by the implicit-midpoint
        Newton fallback.
        """
        theta = _as_vector(theta, self.dimension, "theta")
        action = _as_vector(action, self.dimension, "action")
        n = self.dimension
        d2_thth = np.zeros((n, n))
        d2_ac_th = np.zeros((n, n))
        d2_acac = np.zeros((n, n))
        for m in self.modes:
            k = m.wavevector.astype(float)
            psi = TWO_PI * (float(m.wavevector @ theta) + m.phase)
            cos_psi = math.cos(psi)
            sin_psi = math.sin(psi)
            c = m.coeffs.value(action)
            e = m.envelope.value(tau)
            d2_thth += -(TWO_PI**2) * c * e * cos_psi * np.outer(k, k)
            d2_ac_th += -TWO_PI * e * sin_psi * np.outer(m.coeffs.grad(action), k)
            d2_acac += m.coeffs.hess(action) * e * cos_psi
        s = self.scale
        return d2_thth / s, d2_ac_th / s, d2_acac / s


@dataclass(frozen=True)
class SlowSystem:
    """Near-integrable system H = h(I) + eps * f(theta, I, eps**c * t).

    ``c`` is the slow-time exponent, restricted to [1/2, 1]. ``widths`` is
    optional analyticity metadata (angle, action) carried along for reports.
    """

    h: IntegrableH
    f: Perturbation
    epsilon: float
    c: float
    widths: tuple[float, float] | None = None

    def __post_init__(self):
        if self.f.dimension != self.h.dimension:
            raise ValueError("perturbation and integrable part dimensions differ")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "c", float(self.c))
        if self.epsilon < 0.0:
            raise ValueError("epsilon must be non-negative")
        if not (0.5 <= self.c <= 1.0):
            raise ValueError("slow-time exponent c must lie in [1/2, 1]")

    @property
    def dimension(self) -> int:
        return self.h.dimension

    def slow_tau(self, t: float) -> float:
        """Slow time argument tau = eps**c * t."""
        return self.epsilon**self.c * t

    def hamiltonian(self, state: State) -> float:
        return self.h.value(state.action) + self.epsilon * self.f.value(
            state.theta, state.action, self.slow_tau(state.time)
        )

    def vector_field(self, state: State):
        """Canonical equations (dtheta/dt, dI/dt) at the state's time."""
        tau = self.slow_tau(state.time)
        _, ftheta, faction, _ = self.f.derivatives(state.theta, state.action, tau)
        dtheta = self.h.grad(state.action) + self.epsilon * faction
        daction = -self.epsilon * ftheta
        return dtheta, daction


@dataclass(frozen=True)
class MechanicalSystem:
    """Unscaled mechanical model G = h_p(I) + V(theta, t), sup |V| <= 1.

    The potential must be action independent; its envelopes carry the raw
    time dependence (the slow argument appears only after rescaling).
    """

    p: int
    potential: Perturbation
    width: float | None = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))
        if not self.potential.is_action_independent:
            raise ValueError("mechanical potential must be action independent")
        bound = self.potential.sup_norm_estimate(1.0)
        if bound > 1.0 + 1e-12:
            raise ValueError(f"potential sup-norm estimate {bound} exceeds 1; normalize it first")

    @property
    def dimension(self) -> int:
        return self.potential.dimension


# ---------------------------------------------------------------------------
# JSON serialization. Floats go through repr (shortest round-trip decimal,
# up to 17 significant digits), so load(dump(x)) is bit-exact.
# ---------------------------------------------------------------------------


def _integrable_to_dict(h: IntegrableH) -> dict:
    if isinstance(h, PowerLaw):
        return {"variant": "power_law", "p": h.p, "dimension": h.dimension, "radius": h.radius}
    if isinstance(h, QuadraticForm):
        return {
            "variant": "quadratic_form",
            "matrix": [[float(v) for v in row] for row in h.matrix],
            "radius": h.radius,
        }
    if isinstance(h, PolynomialH):
        return {
            "variant": "polynomial",
            "terms": h.poly.to_terms(),
            "dimension": h.dimension,
            "radius": h.radius,
        }
    raise TypeError(f"unknown integrable variant {type(h).__name__}")


def _integrable_from_dict(d: dict) -> IntegrableH:
    variant = d["variant"]
    if variant == "power_law":
        return PowerLaw(d["p"], d["dimension"], d["radius"])
    if variant == "quadratic_form":
        return QuadraticForm(np.array(d["matrix"], dtype=float), d["radius"])
    if variant == "polynomial":
        return PolynomialH(MultiPoly.from_terms(d["terms"], d["dimension"]), d["radius"])
    raise ValueError(f"unknown integrable variant {variant!r}")


def _perturbation_to_dict(f: Perturbation) -> dict:
    return {
        "modes": [
            {
                "k": [int(v) for v in m.wavevector],
                "poly": m.coeffs.to_terms(),
                "phase": m.phase,
                "envelope": {"kind": m.envelope.kind, "param": m.envelope.param},
            }
            for m in f.modes
        ],
        "scale": f.scale,
    }


def _perturbation_from_dict(d: dict) -> Perturbation:
    modes = []
    for md in d["modes"]:
        k = np.array(md["k"], dtype=np.int64)
        env = md.get("envelope", {"kind": "constant", "param": 1.0})
        modes.append(
            Mode(
                k,
                MultiPoly.from_terms(md["poly"], k.shape[0]),
                md.get("phase", 0.0),
                Envelope(env["kind"], env.get("param", 1.0)),
            )
        )
    return Perturbation(tuple(modes), d.get("scale", 1.0))


def system_to_dict(sys: SlowSystem) -> dict:
    d = {
        "integrable": _integrable_to_dict(sys.h),
        "perturbation": _perturbation_to_dict(sys.f),
        "epsilon": sys.epsilon,
        "c": sys.c,
    }
    if sys.widths is not None:
        d["widths"] = {"r": sys.widths[0], "s": sys.widths[1]}
    return d


def system_from_dict(d: dict) -> SlowSystem:
    widths = None
    if d.get("widths") is not None:
        widths = (float(d["widths"]["r"]), float(d["widths"]["s"]))
    return SlowSystem(
        _integrable_from_dict(d["integrable"]),
        _perturbation_from_dict(d["perturbation"]),
        d["epsilon"],
        d["c"],
        widths,
    )


def system_dumps(sys: SlowSystem) -> str:
    return json.dumps(system_to_dict(sys), indent=2, sort_keys=True)


def system_loads(text: str) -> SlowSystem:
    return system_from_dict(json.loads(text))


def mechanical_to_dict(mech: MechanicalSystem) -> dict:
    d = {"p": mech.p, "potential": _perturbation_to_dict(mech.potential)}
    if mech.width is not None:
        d["width"] = mech.width
    return d


def mechanical_from_dict(d: dict) -> MechanicalSystem:
    return MechanicalSystem(d["p"], _perturbation_from_dict(d["potential"]), d.get("width"))
