"""Drift scans, stability-time estimation, exponent fits, and action scaling.

The experiments here measure how far the action variables wander under a
small perturbation (always in the max norm, relative to the initial
actions), how that wander scales with the perturbation size, and how a
mechanical system with a large action radius maps onto an equivalent
small-perturbation system through an exact rescaling of actions and time.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autonomize import autonomize_slow, extend_state
from .hamcore import (
    IntegrableH,
    MechanicalSystem,
    Perturbation,
    PowerLaw,
    SlowSystem,
    State,
    mechanical_from_dict,
    mechanical_to_dict,
    stream_rng,
    system_from_dict,
    system_to_dict,
)
from .integrators import (
    StepperSpec,
    Trajectory,
    _integrate_with_sign,
    integrate,
)

__all__ = [
    "DriftRecord",
    "StabilityResult",
    "HorizonRule",
    "ScanFamily",
    "ExponentFit",
    "ScalingMap",
    "ScalingCheck",
    "Theorem2Result",
    "measure_drift",
    "stability_time",
    "drift_scan",
    "fit_exponent",
    "scale_mechanical",
    "verify_scaling_conjugacy",
    "theorem2_experiment",
    "predicted_exponents",
    "drift_records_to_csv",
    "theorem2_to_csv",
]


def _lift_for(spec: StepperSpec, system: SlowSystem, state0: State):
    """Splitting steppers integrate the slow-time extension of the system."""
    if spec.method == "implicit_midpoint":
        return system, state0
    return autonomize_slow(system), extend_state(system, state0)


def measure_drift(traj: Trajectory) -> float:
    """Sup over integration steps of the max-norm action deviation.

    Uses the per-step running extrema the integrators maintain, so the
    value covers every step, not only the sampled ones.
    """
    if traj.action_min is None or traj.action_max is None:
        raise ValueError("trajectory carries no per-step action extrema")
    lo = traj.action_initial - traj.action_min
    hi = traj.action_max - traj.action_initial
    return float(np.max(np.maximum(lo, hi), initial=0.0))


@dataclass(frozen=True)
class StabilityResult:
    """Two-sided first-exit times of the action drift past a threshold.

    Exit times are reported as positive elapsed times in each direction;
    a censored direction never crossed the threshold within ``t_max``.
    """

    threshold: float
    t_max: float
    forward_exit: float | None
    forward_censored: bool
    backward_exit: float | None
    backward_censored: bool

    @property
    def censored(self) -> bool:
        return self.forward_censored and self.backward_censored

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "t_max": self.t_max,
            "forward_exit": self.forward_exit,
            "forward_censored": self.forward_censored,
            "backward_exit": self.backward_exit,
            "backward_censored": self.backward_censored,
        }


def stability_time(system, state0, threshold: float, t_max: float,
                   spec: StepperSpec, stride: int = 1_000_000) -> StabilityResult:
    """First time the drift exceeds ``threshold``, forward and backward.

    Both time directions are scanned up to ``t_max``; a direction that
    never crosses is censored (a lower bound on its stability time, not
    an exit).
    """
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    target, start = _lift_for(spec, system, state0)
    sides = {}
    for label, sign in (("forward", 1.0), ("backward", -1.0)):
        traj = _integrate_with_sign(
            target, start, t_max, spec, stride,
            threshold if math.isfinite(threshold) else None,
            True, sign,
        )
        if not math.isfinite(threshold):
            sides[label] = (None, True)
        elif traj.censored:
            sides[label] = (None, True)
        else:
            t0 = traj.times[0]
            sides[label] = (float(traj.exit_time - t0), False)
    return StabilityResult(
        threshold=threshold,
        t_max=t_max,
        forward_exit=sides["forward"][0],
        forward_censored=sides["forward"][1],
        backward_exit=sides["backward"][0],
        backward_censored=sides["backward"][1],
    )


@dataclass(frozen=True)
class HorizonRule:
    """Integration horizon as a function of the perturbation size.

    ``fixed`` runs every cell for ``t0``; ``power`` runs for
    ``t0 * epsilon**(-q)``, capped at ``cap_steps`` integration steps.
    Exponentially long horizons are out of computational reach, so the
    cap is always applied and censoring is reported rather than hidden.
    """

    kind: str = "power"
    t0: float = 10.0
    q: float = 2.0
    cap_steps: int = 10_000_000

    def __post_init__(self):
        if self.kind not in ("fixed", "power"):
            raise ValueError("horizon kind must be 'fixed' or 'power'")
        if self.t0 <= 0.0 or self.cap_steps < 1:
            raise ValueError("horizon t0 and cap_steps must be positive")

    def horizon(self, epsilon: float, dt: float) -> float:
        cap = self.cap_steps * dt
        if self.kind == "fixed":
            return min(self.t0, cap)
        if epsilon <= 0.0:
            return cap
        return min(self.t0 * epsilon ** (-self.q), cap)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "t0": self.t0, "q": self.q,
                "cap_steps": self.cap_steps}

    @classmethod
    def from_dict(cls, d: dict) -> "HorizonRule":
        return cls(**d)


@dataclass(frozen=True)
class ScanFamily:
    """A slow system with the perturbation size left as the scan parameter."""

    h: IntegrableH
    f: Perturbation
    c: float = 0.5

    @classmethod
    def from_system(cls, system: SlowSystem) -> "ScanFamily":
        return cls(h=system.h, f=system.f, c=system.c)

    def system(self, epsilon: float) -> SlowSystem:
        return SlowSystem(h=self.h, f=self.f, epsilon=epsilon, c=self.c)

    @property
    def dimension(self) -> int:
        return self.h.dimension


@dataclass(frozen=True)
class DriftRecord:
    """One measured drift cell of a scan."""

    epsilon: float
    c: float
    seed: int
    T: float
    dt: float
    sup_drift: float
    exit_time: float | None = None
    censored: bool | None = None
    threshold: float | None = None
    error: str | None = None

    def __post_init__(self):
        if self.error is None and self.sup_drift < 0.0:
            raise ValueError("sup_drift must be non-negative")
        if (self.exit_time is not None and self.censored is False
                and self.exit_time > self.T + 1e-12):
            raise ValueError("exit_time cannot exceed the horizon")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c": self.c,
            "seed": self.seed,
            "T": self.T,
            "dt": self.dt,
            "sup_drift": self.sup_drift,
            "exit_time": self.exit_time,
            "censored": self.censored,
            "threshold": self.threshold,
            "error": self.error,
        }


def draw_initial_state(rng: np.random.Generator, n: int, rho: float) -> State:
    """Theorem-style initial condition: I(0) in the half ball, theta uniform."""
    u = rng.standard_normal(n)
    norm = np.linalg.norm(u)
    while norm == 0.0:  # pragma: no cover - measure zero
        u = rng.standard_normal(n)
        norm = np.linalg.norm(u)
    action = (0.5 * rho * rng.random() ** (1.0 / n) / norm) * u
    theta = rng.random(n)
    return State(theta, action)


def _run_drift_cell(payload: dict) -> dict:
    """Worker-side evaluation of one (epsilon, seed) cell."""
    system = system_from_dict(payload["system"])
    spec = StepperSpec(**payload["spec"])
    rng = stream_rng(payload["master_seed"], payload["eps_index"],
                     payload["seed"], 1)
    state0 = draw_initial_state(rng, system.dimension, system.h.radius)
    threshold = payload["threshold"]
    target, start = _lift_for(spec, system, state0)
    try:
        traj = integrate(
            target, start, payload["horizon"], spec,
            stride=max(1, int(round(payload["horizon"] / spec.dt))),
            drift_threshold=threshold,
        )
        record = DriftRecord(
            epsilon=system.epsilon,
            c=system.c,
            seed=payload["seed"],
            T=payload["horizon"],
            dt=spec.dt,
            sup_drift=measure_drift(traj),
            exit_time=traj.exit_time,
            censored=traj.censored,
            threshold=threshold,
        )
    except Exception as exc:  # recorded, the scan continues
        record = DriftRecord(
            epsilon=system.epsilon,
            c=system.c,
            seed=payload["seed"],
            T=payload["horizon"],
            dt=spec.dt,
            sup_drift=math.nan,
            threshold=threshold,
            error=f"{type(exc).__name__}: {exc}",
        )
    return {"eps_index": payload["eps_index"], "seed": payload["seed"],
            "record": record.to_dict()}


def drift_scan(family: ScanFamily, epsilon_grid, horizon_rule: HorizonRule,
               seeds, spec: StepperSpec | None = None,
               threshold: float | None = None, master_seed: int = 0,
               jobs: int = 1) -> list[DriftRecord]:
    """Measure sup drift over a decreasing epsilon grid and seed list.

    Initial conditions come from a counter-based stream keyed per
    (master seed, epsilon index, seed index); every record is
    reproducible from those labels alone.  Individual cell failures are
    recorded as error rows and the scan continues.
    """
    eps = [float(e) for e in epsilon_grid]
    if any(e <= 0.0 for e in eps):
        raise ValueError("epsilon grid must be positive")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilon grid must be strictly decreasing")
    seeds = [int(s) for s in seeds]
    if spec is None:
        spec = StepperSpec()
    payloads = []
    for i, e in enumerate(eps):
        system = family.system(e)
        for s in seeds:
            payloads.append({
                "system": system_to_dict(system),
                "spec": {"method": spec.method, "dt": spec.dt,
                         "newton_tol": spec.newton_tol,
                         "max_iters": spec.max_iters},
                "horizon": horizon_rule.horizon(e, spec.dt),
                "threshold": threshold,
                "master_seed": master_seed,
                "eps_index": i,
                "seed": s,
            })
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_run_drift_cell, payloads))
    else:
        raw = [_run_drift_cell(p) for p in payloads]
    raw.sort(key=lambda r: (r["eps_index"], r["seed"]))
    return [DriftRecord(**{k: v for k, v in r["record"].items()}) for r in raw]


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares power-law fit of drift against the scan parameter."""

    points: tuple  # (log x, log drift) pairs used for the fit
    slope: float
    intercept: float
    r_squared: float
    residual_max: float
    slope_mean: float | None = None
    n_excluded: int = 0

    def to_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "residual_max": self.residual_max,
            "slope_mean": self.slope_mean,
            "n_excluded": self.n_excluded,
        }


def _line_fit(logx: np.ndarray, logy: np.ndarray):
    a = np.vstack([logx, np.ones_like(logx)]).T
    coef, *_ = np.linalg.lstsq(a, logy, rcond=None)
    fitted = a @ coef
    resid = logy - fitted
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return float(coef[0]), float(coef[1]), r2, float(np.max(np.abs(resid)))


def fit_exponent(records, x_field: str = "epsilon",
                 drift_field: str = "sup_drift") -> ExponentFit:
    """Fit log drift against log x over the worst seed per x value.

    The fitted line uses the max-over-seeds drift (matching a worst-case
    bound); the mean-over-seeds slope is reported alongside.  Cells with
    non-positive or failed drift are excluded with a warning; at least
    three distinct x values must survive.
    """
    groups: dict[float, list[float]] = {}
    n_excluded = 0
    for rec in records:
        x = getattr(rec, x_field) if not isinstance(rec, dict) else rec[x_field]
        d = getattr(rec, drift_field) if not isinstance(rec, dict) else rec[drift_field]
        if d is None or not math.isfinite(d) or d <= 0.0:
            n_excluded += 1
            continue
        groups.setdefault(float(x), []).append(float(d))
    if n_excluded:
        warnings.warn(
            f"excluded {n_excluded} record(s) with non-positive or failed drift",
            stacklevel=2,
        )
    if len(groups) < 3:
        raise ValueError("need at least 3 distinct grid values with positive drift")
    xs = np.array(sorted(groups))
    worst = np.array([max(groups[x]) for x in xs])
    means = np.array([np.mean(groups[x]) for x in xs])
    logx = np.log(xs)
    slope, intercept, r2, resid = _line_fit(logx, np.log(worst))
    slope_mean, *_ = _line_fit(logx, np.log(means))
    return ExponentFit(
        points=tuple(zip(logx.tolist(), np.log(worst).tolist())),
        slope=slope,
        intercept=intercept,
        r_squared=r2,
        residual_max=resid,
        slope_mean=slope_mean,
        n_excluded=n_excluded,
    )


# ---------------------------------------------------------------------------
# Action scaling of mechanical systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingMap:
    """Bookkeeping of the action/time rescaling of a mechanical system.

    Actions scale by R, time by R**(1-p), and the potential becomes a
    perturbation of size epsilon = R**(-p) with slow-time exponent
    c = (p-1)/p; drift in original variables is R times scaled drift.
    """

    R: float
    p: int

    def __post_init__(self):
        if self.R <= 0.0:
            raise ValueError("scaling factor R must be positive")
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))

    @property
    def epsilon(self) -> float:
        return self.R ** (-self.p)

    @property
    def c(self) -> float:
        return (self.p - 1) / self.p

    @property
    def time_factor(self) -> float:
        """dt_original / dt_scaled."""
        return self.R ** (1 - self.p)

    @property
    def action_factor(self) -> float:
        return self.R

    def exponents(self, a: float, b: float) -> tuple[float, float]:
        """Scaled stability exponents (a', b') = (p a, p b)."""
        return (self.p * a, self.p * b)

    def to_dict(self) -> dict:
        return {"R": self.R, "p": self.p, "epsilon": self.epsilon,
                "c": self.c, "time_factor": self.time_factor,
                "action_factor": self.action_factor}


def scale_mechanical(mech: MechanicalSystem, R: float):
    """Rescale a mechanical system to an equivalent slow system.

    Returns ``(SlowSystem, ScalingMap)``: the slow system has the same
    power-law integrable part on the radius-2 ball, the unchanged
    potential as its perturbation, ``epsilon = R**(-p)`` and
    ``c = (p-1)/p`` — so the slow-time argument ``epsilon**c * t'``
    reproduces the original potential's clock exactly.
    """
    smap = ScalingMap(R=float(R), p=mech.p)
    h = PowerLaw(mech.p, mech.dimension, radius=2.0)
    system = SlowSystem(h=h, f=mech.potential, epsilon=smap.epsilon, c=smap.c)
    return system, smap


def _original_system(mech: MechanicalSystem, R: float) -> SlowSystem:
    """The unscaled mechanical flow as a unit-perturbation slow system."""
    h = PowerLaw(mech.p, mech.dimension, radius=2.0 * float(R))
    return SlowSystem(h=h, f=mech.potential, epsilon=1.0, c=0.5)


@dataclass(frozen=True)
class ScalingCheck:
    """Outcome of the dual-integration and vector-field conjugacy checks."""

    R: float
    p: int
    t_prime: float
    max_deviation: float
    field_residual: float
    n_field_points: int

    def to_dict(self) -> dict:
        return {"R": self.R, "p": self.p, "t_prime": self.t_prime,
                "max_deviation": self.max_deviation,
                "field_residual": self.field_residual,
                "n_field_points": self.n_field_points}


def verify_scaling_conjugacy(mech: MechanicalSystem, R: float, state0: State,
                             t_prime: float, spec: StepperSpec,
                             n_field_points: int = 100,
                             field_seed: int = 0) -> ScalingCheck:
    """Check that the rescaled flow reproduces the original one.

    Integrates the scaled system from ``(theta0, I0 / R)`` for ``t_prime``
    and the original system from ``(theta0, I0)`` for ``t_prime * R**(1-p)``
    with the time step scaled the same way, then compares angles and
    rescaled actions sample by sample.  Additionally evaluates both
    vector fields at random phase-space points and verifies the exact
    algebraic correspondence (actions by R, time derivatives by
    R**(p-1)).
    """
    if np.linalg.norm(state0.action) > float(R) + 1e-9:
        raise ValueError("initial actions must satisfy |I(0)| <= R")
    scaled, smap = scale_mechanical(mech, R)
    original = _original_system(mech, R)

    state_scaled = State(state0.theta, state0.action / smap.R, 0.0)
    state_orig = State(state0.theta, state0.action.copy(), 0.0)
    spec_orig = StepperSpec(method=spec.method, dt=spec.dt * smap.time_factor,
                            newton_tol=spec.newton_tol, max_iters=spec.max_iters)
    n_steps = int(round(t_prime / spec.dt))
    stride = max(1, n_steps // 256)
    target_s, start_s = _lift_for(spec, scaled, state_scaled)
    target_o, start_o = _lift_for(spec_orig, original, state_orig)
    traj_s = integrate(target_s, start_s, n_steps * spec.dt, spec,
                       stride=stride)
    traj_o = integrate(target_o, start_o, n_steps * spec_orig.dt,
                       spec_orig, stride=stride)
    if traj_s.n_samples != traj_o.n_samples:  # pragma: no cover - step counts match
        raise RuntimeError("sample counts diverged between the two flows")
    dev_theta = np.max(np.abs(traj_s.thetas - traj_o.thetas), initial=0.0)
    dev_action = np.max(
        np.abs(traj_s.actions - traj_o.actions / smap.R), initial=0.0
    )
    max_dev = float(max(dev_theta, dev_action))

    rng = stream_rng(field_seed, 0, 0, 2)
    resid = 0.0
    for _ in range(n_field_points):
        theta = rng.random(mech.dimension)
        action_scaled = draw_initial_state(rng, mech.dimension, 2.0).action
        t_sc = rng.uniform(0.0, max(t_prime, 1.0))
        dth_s, dac_s = scaled.vector_field(State(theta, action_scaled, t_sc))
        dth_o, dac_o = original.vector_field(
            State(theta, smap.R * action_scaled, smap.time_factor * t_sc)
        )
        # d theta / dt and dI/dt of the original flow equal the scaled ones
        # times R**(p-1) (and actions carry the extra R)
        resid = max(
            resid,
            float(np.max(np.abs(dth_o - dth_s / smap.time_factor))),
            float(np.max(np.abs(dac_o - smap.R * dac_s / smap.time_factor))),
        )
    return ScalingCheck(
        R=smap.R, p=smap.p, t_prime=t_prime,
        max_deviation=max_dev, field_residual=resid,
        n_field_points=n_field_points,
    )


@dataclass(frozen=True)
class Theorem2Record:
    """One cell of the scaled-drift experiment."""

    R: float
    p: int
    epsilon: float
    seed: int
    T_prime: float
    dt: float
    drift_scaled: float
    drift_original: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "R": self.R, "p": self.p, "epsilon": self.epsilon,
            "seed": self.seed, "T_prime": self.T_prime, "dt": self.dt,
            "drift_scaled": self.drift_scaled,
            "drift_original": self.drift_original,
            "error": self.error,
        }


@dataclass(frozen=True)
class Theorem2Result:
    """Scaled-drift records with the log-drift versus log-R fit."""

    records: tuple
    fit: ExponentFit
    slope_prediction: float
    n: int
    p: int

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "fit": self.fit.to_dict(),
            "slope_prediction": self.slope_prediction,
            "n": self.n,
            "p": self.p,
        }


def _run_theorem2_cell(payload: dict) -> dict:
    mech = mechanical_from_dict(payload["mechanical"])
    R = payload["R"]
    scaled, smap = scale_mechanical(mech, R)
    spec = StepperSpec(**payload["spec"])
    rng = stream_rng(payload["master_seed"], payload["r_index"],
                     payload["seed"], 3)
    state0 = draw_initial_state(rng, mech.dimension, scaled.h.radius)
    target, start = _lift_for(spec, scaled, state0)
    try:
        traj = integrate(
            target, start, payload["horizon"], spec,
            stride=max(1, int(round(payload["horizon"] / spec.dt))),
        )
        drift_scaled = measure_drift(traj)
        record = Theorem2Record(
            R=R, p=mech.p, epsilon=smap.epsilon, seed=payload["seed"],
            T_prime=payload["horizon"], dt=spec.dt,
            drift_scaled=drift_scaled,
            drift_original=smap.R * drift_scaled,
        )
    except Exception as exc:
        record = Theorem2Record(
            R=R, p=mech.p, epsilon=smap.epsilon, seed=payload["seed"],
            T_prime=payload["horizon"], dt=spec.dt,
            drift_scaled=math.nan, drift_original=math.nan,
            error=f"{type(exc).__name__}: {exc}",
        )
    return {"r_index": payload["r_index"], "seed": payload["seed"],
            "record": record}


def theorem2_experiment(mech: MechanicalSystem, R_grid, seeds,
                        horizon_rule: HorizonRule | None = None,
                        spec: StepperSpec | None = None,
                        master_seed: int = 0, jobs: int = 1) -> Theorem2Result:
    """Drift of the rescaled mechanical family across an increasing R grid.

    Each cell integrates the scaled system; drift in the original
    variables is exactly R times the scaled drift (pure bookkeeping, no
    re-integration).  The fitted slope of log original drift against
    log R is compared against the reference prediction
    ``1 - p/(2n)`` (from the scaled exponents with the convex reference
    value b = 1/(2n); conjectural for a time-dependent potential).
    """
    rs = [float(r) for r in R_grid]
    if any(r < 1.0 for r in rs):
        raise ValueError("R grid entries must be >= 1")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        raise ValueError("R grid must be strictly increasing")
    if horizon_rule is None:
        horizon_rule = HorizonRule()
    if spec is None:
        spec = StepperSpec()
    payloads = []
    for i, r in enumerate(rs):
        eps = ScalingMap(R=r, p=mech.p).epsilon
        for s in seeds:
            payloads.append({
                "mechanical": mechanical_to_dict(mech),
                "R": r,
                "spec": {"method": spec.method, "dt": spec.dt,
                         "newton_tol": spec.newton_tol,
                         "max_iters": spec.max_iters},
                "horizon": horizon_rule.horizon(eps, spec.dt),
                "master_seed": master_seed,
                "r_index": i,
                "seed": int(s),
            })
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(_run_theorem2_cell, payloads))
    else:
        raw = [_run_theorem2_cell(p) for p in payloads]
    raw.sort(key=lambda r: (r["r_index"], r["seed"]))
    records = tuple(r["record"] for r in raw)
    fit = fit_exponent(records, x_field="R", drift_field="drift_original")
    n = mech.dimension
    prediction = 1.0 - mech.p / (2.0 * n)
    return Theorem2Result(records=records, fit=fit,
                          slope_prediction=prediction, n=n, p=mech.p)


# ---------------------------------------------------------------------------
# Reference exponent table
# ---------------------------------------------------------------------------

_CASES = ("convex", "periodic", "quasiperiodic", "mechanical")


def predicted_exponents(n: int, case: str, tau: float | None = None,
                        p: int | None = None) -> dict:
    """Reference stability exponents (a, b) for the classical regimes.

    Informational only: 'reference' rows are proved elsewhere in the
    literature for their settings; 'conjectural' rows are expectations,
    and fits produced by this package are never asserted against either.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if case == "convex":
        v = 1.0 / (2 * n)
        return {"case": "convex", "n": n, "a": v, "b": v,
                "status": "reference",
                "note": "uniformly convex integrable part, autonomous or slow-time"}
    if case == "periodic":
        v = 1.0 / (2 * (n + 1))
        return {"case": "periodic", "n": n, "a": v, "b": v,
                "status": "reference",
                "note": "time-periodic forcing, quasi-convex extension"}
    if case == "quasiperiodic":
        if tau is None:
            raise ValueError("the quasiperiodic case needs the Diophantine exponent tau")
        v = 1.0 / (2 * (n + 1 + tau))
        return {"case": "quasiperiodic", "n": n, "tau": tau, "a": v, "b": v,
                "status": "conjectural",
                "note": "Diophantine multi-frequency forcing; open problem"}
    if case == "mechanical":
        if p is None:
            raise ValueError("the mechanical case needs the power p")
        if p < 2:
            raise ValueError("p must be >= 2")
        v = 1.0 / (2 * n)
        return {"case": "mechanical", "n": n, "p": p,
                "a": p * v, "b": p * v,
                "drift_vs_R_slope": 1.0 - p * v,
                "status": "conjectural",
                "note": "scaled exponents a'=pa, b'=pb from the convex reference value"}
    raise ValueError(f"unknown case {case!r}; expected one of {_CASES}")


# ---------------------------------------------------------------------------
# Tabular output
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def drift_records_to_csv(records, path) -> None:
    """Write scan records with the fixed drift-scan column set."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epsilon", "c", "seed", "T", "dt", "sup_drift",
                         "exit_time", "censored"])
        for r in records:
            writer.writerow([
                _cell(r.epsilon), _cell(r.c), _cell(r.seed), _cell(r.T),
                _cell(r.dt), _cell(r.sup_drift), _cell(r.exit_time),
                _cell(r.censored),
            ])


def theorem2_to_csv(result: Theorem2Result, path) -> None:
    """Write scaling-experiment records plus the reference slope column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["R", "p", "epsilon", "drift_scaled",
                         "drift_original", "slope_prediction"])
        for r in result.records:
            writer.writerow([
                _cell(r.R), _cell(r.p), _cell(r.epsilon),
                _cell(r.drift_scaled), _cell(r.drift_original),
                _cell(result.slope_prediction),
            ])
