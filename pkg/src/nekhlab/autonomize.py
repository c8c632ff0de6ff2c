"""Autonomization of slowly forced systems and small-divisor estimates.

A slowly forced system H = h(I) + eps*f(theta, I, eps**c t) is made
autonomous by promoting the slow time to a coordinate x = eps**c * t with
conjugate action y:

    H_ext(theta, I, x, y) = h(I) + eps**c * y + eps * f(theta, I, x)

whose flow reproduces the original (theta, I) dynamics exactly. Periodic
and quasi-periodic forcings admit the classical torus extensions instead;
those layouts are assembled here for vector-field work and for the
Diophantine scanner, while long-horizon integrations use the slow-time
form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .hamcore import Envelope, IntegrableH, Perturbation, SlowSystem, State, _as_vector

__all__ = [
    "ExtendedState",
    "ExtendedSystem",
    "autonomize_slow",
    "autonomize_periodic",
    "autonomize_quasiperiodic",
    "AutonomizeCheck",
    "verify_autonomization",
    "diophantine_estimate",
    "diophantine_scan",
]

SLOW_TIME = "slow_time"
PERIODIC = "periodic"
QUASI_PERIODIC = "quasi_periodic"


@dataclass(frozen=True)
class ExtendedState:
    """State of the slow-time extension: (theta, I, x, y)."""

    theta: np.ndarray
    action: np.ndarray
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        th = _as_vector(self.theta, None, "theta")
        ac = _as_vector(self.action, th.shape[0], "action")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "action", ac)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def dimension(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class ExtendedSystem:
    """Autonomous extension of a slowly forced system.

    ``form`` selects the layout:

    - ``slow_time``: states are :class:`ExtendedState`; the Hamiltonian is
      h(I) + eps**c * y + eps * f(theta, I, x).
    - ``periodic``: the forcing phase is one extra angle of unit frequency;
      states are combined (n+1 angles, n+1 actions) arrays.
    - ``quasi_periodic``: m extra angles advancing at frequencies ``omega``;
      the coupling ``f_ext`` lives on the combined torus. ``dioph_tau`` and
      ``dioph_gamma`` carry the small-divisor metadata for reports.
    """

    base: SlowSystem
    form: str = SLOW_TIME
    omega: np.ndarray | None = None
    f_ext: Perturbation | None = None
    dioph_tau: float | None = None
    dioph_gamma: float | None = None

    def __post_init__(self):
        if self.form not in (SLOW_TIME, PERIODIC, QUASI_PERIODIC):
            raise ValueError(f"unknown extension form {self.form!r}")
        if self.omega is not None:
            object.__setattr__(self, "omega", _as_vector(self.omega, None, "omega"))

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def n_forcing_angles(self) -> int:
        if self.form == SLOW_TIME:
            return 0
        return int(self.omega.shape[0])

    # -- slow-time form ----------------------------------------------------

    def hamiltonian(self, state: ExtendedState) -> float:
        """Extended energy for the slow-time form (conserved along the flow)."""
        self._require(SLOW_TIME)
        sysb = self.base
        return (
            sysb.h.value(state.action)
            + sysb.epsilon**sysb.c * state.y
            + sysb.epsilon * sysb.f.value(state.theta, state.action, state.x)
        )

    def vector_field(self, state: ExtendedState):
        """Slow-time extended equations (dtheta, dI, dx, dy)."""
        self._require(SLOW_TIME)
        sysb = self.base
        _, ftheta, faction, ftau = sysb.f.derivatives(state.theta, state.action, state.x)
        eps = sysb.epsilon
        dtheta = sysb.h.grad(state.action) + eps * faction
        daction = -eps * ftheta
        dx = eps**sysb.c
        dy = -eps * ftau
        return dtheta, daction, dx, dy

    # -- torus extensions ----------------------------------------------------

    def combined_vector_field(self, angles: np.ndarray, actions: np.ndarray):
        """Vector field of the periodic / quasi-periodic torus extension.

        ``angles`` stacks (theta, phi) and ``actions`` stacks (I, J); both
        have length n + m. Returns (dangles, dactions).
        """
        if self.form == SLOW_TIME:
            raise ValueError("combined layout applies to periodic/quasi-periodic forms only; "
                             "use vector_field for the slow-time form")
        n = self.dimension
        m = self.n_forcing_angles
        angles = _as_vector(angles, n + m, "angles")
        actions = _as_vector(actions, n + m, "actions")
        eps = self.base.epsilon
        dangles = np.concatenate([self.base.h.grad(actions[:n]), self.omega.copy()])
        dactions = np.zeros(n + m)
        if self.form == PERIODIC:
            _, ftheta, faction, ftau = self.base.f.derivatives(
                angles[:n], actions[:n], angles[n]
            )
            dangles[:n] += eps * faction
            dactions[:n] = -eps * ftheta
            dactions[n] = -eps * ftau
        else:
            _, ftheta, faction, _ = self.f_ext.derivatives(angles, actions, 0.0)
            dangles += eps * faction
            dactions = -eps * ftheta
        return dangles, dactions

    def _require(self, form: str):
        if self.form != form:
            raise ValueError(f"operation requires the {form!r} form, system has {self.form!r}")


def autonomize_slow(system: SlowSystem) -> ExtendedSystem:
    """Promote the slow time of ``system`` to a phase-space coordinate.

    The integrable part stays h(I); the extra term eps**c * y + eps * f is
    the perturbation of the extension. Initial conditions use the gauge
    y(0) = 0 and x(0) = eps**c * t0.
    """
    return ExtendedSystem(system, SLOW_TIME)


def extend_state(system: SlowSystem, state: State) -> ExtendedState:
    """Lift a (theta, I, t) state to the slow-time extension (y gauge 0)."""
    return ExtendedState(state.theta, state.action, system.slow_tau(state.time), 0.0)


def _envelope_periodic(env: Envelope) -> bool:
    if env.kind == "constant":
        return True
    return env.kind == "cosine" and float(env.param).is_integer()


def autonomize_periodic(h: IntegrableH, f: Perturbation, epsilon: float) -> ExtendedSystem:
    """Extend H = h + eps*f(theta, I, t) with f 1-periodic in its raw time.

    Every envelope must be constant or a cosine of integer frequency, so the
    forcing phase closes on one extra angle of unit frequency.
    """
    for mode in f.modes:
        if not _envelope_periodic(mode.envelope):
            raise ValueError(
                "periodic extension requires 1-periodic envelopes "
                "(constant or integer-frequency cosine)"
            )
    base = SlowSystem(h, f, epsilon, 1.0)
    return ExtendedSystem(base, PERIODIC, omega=np.array([1.0]))


def autonomize_quasiperiodic(
    h: IntegrableH,
    f_ext: Perturbation,
    epsilon: float,
    omega: np.ndarray,
    tau: float,
    kmax: int = 30,
) -> ExtendedSystem:
    """Torus extension for quasi-periodic forcing with frequencies ``omega``.

    ``f_ext`` is defined on the combined torus: its wavevectors have length
    n + m (the last m slots index the forcing angles) and its coefficient
    polynomials must not involve the forcing actions. The Diophantine
    constant of ``omega`` is estimated up to order ``kmax`` and stored.
    """
    omega = _as_vector(omega, None, "omega")
    m = omega.shape[0]
    n = f_ext.dimension - m
    if n < 1:
        raise ValueError("f_ext must cover the system angles plus the forcing angles")
    if n != h.dimension:
        raise ValueError("f_ext combined dimension must equal h dimension plus len(omega)")
    for mode in f_ext.modes:
        if mode.envelope.kind != "constant":
            raise ValueError("quasi-periodic couplings carry no envelope; use constant")
        if np.any(mode.coeffs.exponents[:, n:] != 0):
            raise ValueError("coefficients must not depend on the forcing actions")
    gamma, _ = diophantine_estimate(omega, tau, kmax)
    base = SlowSystem(h, _restrict_placeholder(f_ext, n), epsilon, 1.0)
    return ExtendedSystem(
        base, QUASI_PERIODIC, omega=omega, f_ext=f_ext, dioph_tau=float(tau), dioph_gamma=gamma
    )


def _restrict_placeholder(f_ext: Perturbation, n: int) -> Perturbation:
    # The base SlowSystem of a quasi-periodic extension only fixes h and the
    # bookkeeping (epsilon); dynamics go through f_ext. Store the coupling
    # restricted to zero forcing phase so the base object is well formed.
    from .hamcore import Mode, MultiPoly

    modes = []
    for mode in f_ext.modes:
        k = mode.wavevector[:n]
        if np.all(k == 0):
            continue
        modes.append(
            Mode(
                k,
                MultiPoly(mode.coeffs.exponents[:, :n], mode.coeffs.coefficients),
                mode.phase,
                mode.envelope,
            )
        )
    if not modes:
        modes = [Mode.simple(np.eye(n, dtype=np.int64)[0], 0.0)]
    return Perturbation(tuple(modes), f_ext.scale)


@dataclass(frozen=True)
class AutonomizeCheck:
    """Result of comparing direct vs extended integrations."""

    form: str
    deviation: float
    energy_drift: float
    steps: int

    def to_dict(self) -> dict:
        return {
            "form": self.form,
            "deviation": self.deviation,
            "energy_drift": self.energy_drift,
            "steps": self.steps,
        }


def verify_autonomization(system: SlowSystem, state0: State, t_final: float, spec=None,
                          stride: int = 1) -> AutonomizeCheck:
    """Integrate the system directly and through its extension; compare.

    Both runs use the same implicit-midpoint stepper and step size. The
    extension starts in the gauge y(0) = 0, x(0) = eps**c * t0. Returns the
    max-norm deviation of the shared (theta, I) coordinates over all samples
    together with the peak extended-energy wander of the extension run.
    """
    from .integrators import StepperSpec, integrate

    if spec is None:
        spec = StepperSpec(method="implicit_midpoint")
    if spec.method != "implicit_midpoint":
        raise ValueError("direct non-autonomous stepping supports implicit_midpoint only")
    ext = autonomize_slow(system)
    s_ext = extend_state(system, state0)
    traj_direct = integrate(system, state0, t_final, spec, stride=stride)
    traj_ext = integrate(ext, s_ext, t_final, spec, stride=stride)
    dev_theta = np.max(np.abs(traj_direct.thetas - traj_ext.thetas), initial=0.0)
    dev_action = np.max(np.abs(traj_direct.actions - traj_ext.actions), initial=0.0)
    energies = np.array(
        [
            ext.hamiltonian(ExtendedState(th, ac, x, y))
            for th, ac, x, y in zip(traj_ext.thetas, traj_ext.actions, traj_ext.xs, traj_ext.ys)
        ]
    )
    return AutonomizeCheck(
        form=SLOW_TIME,
        deviation=float(max(dev_theta, dev_action)),
        energy_drift=float(np.max(np.abs(energies - energies[0]))),
        steps=traj_direct.n_steps,
    )


# ---------------------------------------------------------------------------
# Small divisors
# ---------------------------------------------------------------------------


def diophantine_estimate(omega, tau: float, kmax: int):
    """Brute-force Diophantine constant of a frequency vector.

    Scans all integer vectors 0 < |k|_inf <= kmax and returns

        gamma_hat = min |k . omega| * |k|_inf**tau

    together with a minimizing k (sign-normalized so its first non-zero
    entry is positive). A zero value certifies a resonance of order <= kmax.

    Parameters
    ----------
    omega : array_like
        Frequency vector (length m >= 1).
    tau : float
        Diophantine exponent (tau >= m - 1 for generic vectors).
    kmax : int
        Scan order; the estimate is non-increasing in kmax.
    """
    omega = _as_vector(omega, None, "omega")
    m = omega.shape[0]
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if (2 * kmax + 1) ** m > 4_000_000:
        raise ValueError("exhaustive scan too large; reduce kmax or dimension")
    rng = range(-kmax, kmax + 1)
    best = math.inf
    best_norm = 0
    best_k = None
    for k in itertools.product(rng, repeat=m):
        norm = max(abs(v) for v in k)
        if norm == 0:
            continue
        val = abs(sum(ki * wi for ki, wi in zip(k, omega))) * norm**tau
        # ties broken toward the lowest-order k so resonances report the
        # fundamental vector
        if val < best or (val == best and norm < best_norm):
            best = val
            best_norm = norm
            best_k = k
    k_arr = np.array(best_k, dtype=np.int64)
    for v in k_arr:
        if v != 0:
            if v < 0:
                k_arr = -k_arr
            break
    return float(best), k_arr


def diophantine_scan(omega, tau: float, kmax_list) -> list[dict]:
    """Estimate gamma_hat for each scan order; rows are CSV-ready dicts."""
    rows = []
    for kmax in kmax_list:
        gamma, kmin = diophantine_estimate(omega, tau, int(kmax))
        rows.append(
            {
                "K": int(kmax),
                "gamma_hat": gamma,
                "k_min": " ".join(str(int(v)) for v in kmin),
            }
        )
    return rows
