"""Drift measurement, stability horizons, scans, and the scaling bookkeeping."""

import json
import math

import numpy as np
import pytest

from nekhlab.autonomize import autonomize_slow, extend_state
from nekhlab.hamcore import (
    Envelope,
    MechanicalSystem,
    Mode,
    Perturbation,
    PowerLaw,
    SlowSystem,
    State,
)
from nekhlab.experiments import (
    DriftRecord,
    HorizonRule,
    ScanFamily,
    ScalingMap,
    draw_initial_state,
    drift_records_to_csv,
    drift_scan,
    fit_exponent,
    measure_drift,
    predicted_exponents,
    scale_mechanical,
    stability_time,
    theorem2_experiment,
    theorem2_to_csv,
    verify_scaling_conjugacy,
)
from nekhlab.integrators import StepperSpec, Trajectory, integrate

from conftest import one_mode_perturbation


def _scan_family(amplitude=0.5):
    return ScanFamily(h=PowerLaw(2, 2, radius=1.0),
                      f=one_mode_perturbation(amplitude=amplitude), c=0.5)


def _mechanical(amplitude=1.0, p=2):
    f = one_mode_perturbation(amplitude=amplitude,
                              envelope=Envelope("cosine", 1.0))
    return MechanicalSystem(p=p, potential=f)


# ---------------------------------------------------------------------------
# drift measurement
# ---------------------------------------------------------------------------


def test_drift_vanishes_without_perturbation():
    system = SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(), 0.0, 0.5)
    ext = autonomize_slow(system)
    st = extend_state(system, State([0.15, 0.7], [0.3, -0.2]))
    traj = integrate(ext, st, 20.0, StepperSpec("yoshida4", 0.01), stride=100)
    assert measure_drift(traj) == 0.0


def test_drift_reads_the_per_step_extrema():
    traj = Trajectory(
        times=np.array([0.0]),
        thetas=np.zeros((1, 2)),
        actions=np.array([[0.2, -0.1]]),
        xs=None,
        ys=None,
        drift_running=np.array([0.0]),
        action_initial=np.array([0.2, -0.1]),
        action_min=np.array([0.05, -0.1]),
        action_max=np.array([0.2, 0.3]),
        drift_sup=0.4,
        n_steps=7,
        dt=0.1,
        method="yoshida4",
        stride=1,
    )
    # the largest one-sided excursion is I_2 rising from -0.1 to 0.3
    assert measure_drift(traj) == pytest.approx(0.4, abs=1e-15)


def test_drift_requires_extrema():
    traj = Trajectory(
        times=np.array([0.0]), thetas=np.zeros((1, 1)),
        actions=np.zeros((1, 1)), xs=None, ys=None,
        drift_running=np.array([0.0]), action_initial=np.zeros(1),
        action_min=None, action_max=None, drift_sup=0.0, n_steps=0,
        dt=0.1, method="yoshida4", stride=1,
    )
    with pytest.raises(ValueError, match="extrema"):
        measure_drift(traj)


def test_drift_is_stable_under_step_refinement():
    system = SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(),
                        1e-3, 0.5)
    ext = autonomize_slow(system)
    st = extend_state(system, State([0.15, 0.7], [0.3, -0.2]))
    coarse = integrate(ext, st, 1000.0, StepperSpec("yoshida4", 0.01),
                       stride=10**6)
    fine = integrate(ext, st, 1000.0, StepperSpec("yoshida4", 0.0025),
                     stride=10**6)
    da, db = measure_drift(coarse), measure_drift(fine)
    assert abs(da - db) / db < 1e-7


# ---------------------------------------------------------------------------
# two-sided stability time (librating pendulum oracle)
# ---------------------------------------------------------------------------


def _pendulum_exit_prediction(eps: float) -> float:
    # energy conservation on h = I^2, f = cos(2 pi theta), started at the
    # turning point theta = 1/4: I^2 = -eps cos(2 pi theta), so the time to
    # reach |I| = sqrt(eps)/2 is an explicit quadrature; the substitution
    # u = pi/2 + s^2 removes the inverse-square-root singularity
    u_star = math.acos(-0.25)
    s_max = math.sqrt(u_star - math.pi / 2.0)
    s = np.linspace(0.0, s_max, 200001)
    g = np.empty_like(s)
    g[0] = 2.0
    g[1:] = 2.0 * s[1:] / np.sqrt(np.sin(s[1:] ** 2))
    return float(np.trapezoid(g, s)) / (4.0 * math.pi * math.sqrt(eps))


def test_pendulum_exit_time_matches_the_quadrature():
    eps = 1e-3
    h = PowerLaw(2, 1, radius=1.0)
    system = SlowSystem(h, one_mode_perturbation(amplitude=1.0, k=(1,)), eps, 0.5)
    state0 = State([0.25], [0.0])
    threshold = math.sqrt(eps) / 2.0
    t_pred = _pendulum_exit_prediction(eps)
    res = stability_time(system, state0, threshold, 100.0,
                         StepperSpec("yoshida4", 0.01))
    assert not res.forward_censored and not res.backward_censored
    assert not res.censored
    # the flow from a turning point is time-symmetric
    assert res.forward_exit == res.backward_exit
    assert 0.5 * t_pred < res.forward_exit < 2.0 * t_pred
    # with dt = 1e-2 the measured crossing sits within a step of truth
    assert res.forward_exit == pytest.approx(t_pred, rel=5e-3)


def test_unreachable_threshold_censors_both_directions():
    system = SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(),
                        1e-3, 0.5)
    state0 = State([0.15, 0.7], [0.3, -0.2])
    res = stability_time(system, state0, 1e6, 5.0, StepperSpec("yoshida4", 0.01))
    assert res.censored
    assert res.forward_exit is None and res.backward_exit is None
    assert res.to_dict() == {
        "threshold": 1e6, "t_max": 5.0,
        "forward_exit": None, "forward_censored": True,
        "backward_exit": None, "backward_censored": True,
    }


def test_zero_perturbation_never_exits():
    system = SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(), 0.0, 0.5)
    res = stability_time(system, State([0.1, 0.2], [0.3, 0.4]), 1e-6, 2.0,
                         StepperSpec("yoshida4", 0.01))
    assert res.censored


def test_stability_threshold_must_be_positive():
    system = SlowSystem(PowerLaw(2, 2, radius=1.0), one_mode_perturbation(), 1e-3, 0.5)
    with pytest.raises(ValueError, match="threshold"):
        stability_time(system, State([0.1, 0.2], [0.3, 0.4]), 0.0, 1.0,
                       StepperSpec("yoshida4", 0.01))


# ---------------------------------------------------------------------------
# horizon rules
# ---------------------------------------------------------------------------


def test_horizon_rule_arithmetic():
    rule = HorizonRule(kind="power", t0=10.0, q=2.0, cap_steps=10**7)
    assert rule.horizon(1e-2, 0.01) == 1e5  # 10 * eps^-2 meets the cap exactly
    assert rule.horizon(0.25, 0.01) == 160.0
    assert rule.horizon(0.1, 0.01) == pytest.approx(1000.0, rel=1e-15)
    assert rule.horizon(0.0, 0.01) == 1e5  # degenerate size falls to the cap

    fixed = HorizonRule(kind="fixed", t0=50.0)
    assert fixed.horizon(1e-9, 0.01) == 50.0
    assert HorizonRule(kind="fixed", t0=50.0, cap_steps=100).horizon(1.0, 0.01) == 1.0


def test_horizon_rule_validation_and_round_trip():
    with pytest.raises(ValueError, match="fixed.*power"):
        HorizonRule(kind="exponential")
    with pytest.raises(ValueError, match="positive"):
        HorizonRule(t0=0.0)
    with pytest.raises(ValueError, match="positive"):
        HorizonRule(cap_steps=0)
    rule = HorizonRule(kind="power", t0=2.0, q=1.5, cap_steps=500)
    assert HorizonRule.from_dict(rule.to_dict()) == rule


# ---------------------------------------------------------------------------
# drift scans
# ---------------------------------------------------------------------------


def test_scan_drift_decreases_with_the_perturbation_size():
    family = _scan_family()
    rule = HorizonRule(kind="fixed", t0=50.0)
    records = drift_scan(family, [1e-2, 1e-3, 1e-4], rule, seeds=[0, 1],
                         spec=StepperSpec("yoshida4", 0.01), master_seed=0)
    assert [(r.epsilon, r.seed) for r in records] == [
        (1e-2, 0), (1e-2, 1), (1e-3, 0), (1e-3, 1), (1e-4, 0), (1e-4, 1)
    ]
    for rec in records:
        assert rec.error is None
        assert rec.censored is None and rec.exit_time is None
        assert rec.T == 50.0 and rec.dt == 0.01 and rec.c == 0.5
        assert rec.sup_drift > 0.0
    for seed in (0, 1):
        drifts = [r.sup_drift for r in records if r.seed == seed]
        assert drifts[0] > drifts[1] > drifts[2]


def test_scan_is_reproducible_and_parallel_order_independent():
    family = _scan_family()
    rule = HorizonRule(kind="fixed", t0=5.0)
    kw = dict(epsilon_grid=[1e-2, 5e-3, 2e-3], horizon_rule=rule,
              seeds=[0, 1], spec=StepperSpec("yoshida4", 0.01), master_seed=9)
    serial = drift_scan(family, **kw)
    again = drift_scan(family, **kw)
    parallel = drift_scan(family, **kw, jobs=2)
    as_dicts = lambda rs: [r.to_dict() for r in rs]
    assert as_dicts(serial) == as_dicts(again)
    assert as_dicts(serial) == as_dicts(parallel)


def test_scan_with_threshold_populates_exit_fields():
    family = _scan_family(amplitude=1.0)
    rule = HorizonRule(kind="fixed", t0=20.0)
    records = drift_scan(family, [0.5, 0.2, 0.1], rule, seeds=[0],
                         spec=StepperSpec("yoshida4", 0.01),
                         threshold=1e-3, master_seed=1)
    for rec in records:
        assert rec.threshold == 1e-3
        assert rec.censored is False
        assert rec.exit_time is not None and 0.0 < rec.exit_time <= rec.T


def test_scan_records_cell_failures_instead_of_aborting():
    # an implicit-midpoint budget of one iteration cannot solve these stiff
    # cells, so every record carries the failure note
    h = PowerLaw(2, 1, radius=1.0)
    family = ScanFamily(h=h, f=one_mode_perturbation(amplitude=1.0, k=(3,)), c=0.5)
    rule = HorizonRule(kind="fixed", t0=1.0)
    spec = StepperSpec("implicit_midpoint", 0.08, max_iters=1)
    records = drift_scan(family, [2.0, 1.0, 0.9], rule, seeds=[0], spec=spec)
    assert all(r.error is not None and "ConvergenceError" in r.error
               for r in records)
    assert all(math.isnan(r.sup_drift) for r in records)
    with pytest.warns(UserWarning, match="excluded 3"):
        with pytest.raises(ValueError, match="at least 3"):
            fit_exponent(records)


def test_scan_grid_validation():
    family = _scan_family()
    rule = HorizonRule(kind="fixed", t0=1.0)
    with pytest.raises(ValueError, match="strictly decreasing"):
        drift_scan(family, [1e-3, 1e-2], rule, seeds=[0])
    with pytest.raises(ValueError, match="positive"):
        drift_scan(family, [1e-2, 0.0], rule, seeds=[0])
    assert drift_scan(family, [1e-2, 1e-3, 1e-4], rule, seeds=[]) == []


def test_initial_conditions_fill_the_half_ball():
    rng = np.random.default_rng(123)
    for _ in range(100):
        st = draw_initial_state(rng, 3, 2.0)
        assert np.linalg.norm(st.action) <= 1.0 + 1e-12
        assert np.all((0.0 <= st.theta) & (st.theta < 1.0))
        assert st.time == 0.0


def test_drift_record_invariants():
    with pytest.raises(ValueError, match="non-negative"):
        DriftRecord(epsilon=1e-3, c=0.5, seed=0, T=1.0, dt=0.1, sup_drift=-1.0)
    with pytest.raises(ValueError, match="horizon"):
        DriftRecord(epsilon=1e-3, c=0.5, seed=0, T=1.0, dt=0.1, sup_drift=0.1,
                    exit_time=2.0, censored=False)
    # failed cells may carry NaN drift
    rec = DriftRecord(epsilon=1e-3, c=0.5, seed=0, T=1.0, dt=0.1,
                      sup_drift=math.nan, error="RuntimeError: boom")
    assert rec.to_dict()["error"] == "RuntimeError: boom"


# ---------------------------------------------------------------------------
# exponent fits
# ---------------------------------------------------------------------------


def test_fit_recovers_an_exact_power_law():
    records = [
        {"epsilon": e, "sup_drift": 0.7 * e**0.5}
        for e in (1e-1, 1e-2, 1e-3, 1e-4)
        for _ in range(2)
    ]
    fit = fit_exponent(records)
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(0.7), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.residual_max < 1e-12
    assert fit.slope_mean == pytest.approx(0.5, abs=1e-12)
    assert fit.n_excluded == 0
    assert len(fit.points) == 4


def test_fit_uses_the_worst_seed_per_grid_value():
    records = []
    for x in (1.0, 2.0, 4.0):
        records.append({"epsilon": x, "sup_drift": 1.5 * x})
        records.append({"epsilon": x, "sup_drift": 2.0 * x})
    fit = fit_exponent(records)
    assert fit.slope == pytest.approx(1.0, abs=1e-12)
    assert math.exp(fit.intercept) == pytest.approx(2.0, rel=1e-12)


def test_fit_excludes_degenerate_cells_with_a_warning():
    records = [{"epsilon": e, "sup_drift": e} for e in (1e-1, 1e-2, 1e-3)]
    records.append({"epsilon": 1e-4, "sup_drift": 0.0})
    with pytest.warns(UserWarning, match="excluded 1"):
        fit = fit_exponent(records)
    assert fit.n_excluded == 1
    assert len(fit.points) == 3


def test_fit_needs_three_distinct_grid_values():
    records = [{"epsilon": e, "sup_drift": e} for e in (1e-1, 1e-1, 1e-2)]
    with pytest.raises(ValueError, match="at least 3"):
        fit_exponent(records)


# ---------------------------------------------------------------------------
# mechanical rescaling
# ---------------------------------------------------------------------------


def test_scaling_map_arithmetic():
    m = ScalingMap(R=10.0, p=2)
    assert m.epsilon == 0.01
    assert m.c == 0.5
    assert m.time_factor == 0.1
    assert m.action_factor == 10.0
    assert m.exponents(0.25, 0.25) == (0.5, 0.5)

    m3 = ScalingMap(R=2.0, p=3)
    assert m3.epsilon == 0.125
    assert m3.c == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert m3.time_factor == 0.25

    identity = ScalingMap(R=1.0, p=2)
    assert identity.epsilon == 1.0 and identity.time_factor == 1.0

    with pytest.raises(ValueError, match="positive"):
        ScalingMap(R=0.0, p=2)
    with pytest.raises(ValueError, match=">= 2"):
        ScalingMap(R=2.0, p=1)


def test_scale_mechanical_builds_the_slow_twin():
    mech = _mechanical(p=3)
    system, smap = scale_mechanical(mech, 2.0)
    assert isinstance(system, SlowSystem)
    assert system.epsilon == 0.125
    assert system.c == smap.c
    assert system.h.p == 3 and system.h.radius == 2.0
    assert system.f is mech.potential
    assert smap.to_dict()["action_factor"] == 2.0


def test_zero_potential_conjugacy_is_exact():
    mech = _mechanical(amplitude=0.0)
    check = verify_scaling_conjugacy(mech, 4.0, State([0.2, 0.7], [0.9, -1.2]),
                                     100.0, StepperSpec("yoshida4", 0.01))
    assert check.max_deviation == 0.0
    assert check.field_residual == 0.0
    assert check.R == 4.0 and check.p == 2 and check.t_prime == 100.0
    assert check.n_field_points == 100


def test_conjugacy_holds_for_a_real_potential():
    mech = _mechanical(amplitude=1.0)
    check = verify_scaling_conjugacy(mech, 2.0, State([0.2, 0.7], [0.9, -1.2]),
                                     50.0, StepperSpec("yoshida4", 0.01),
                                     n_field_points=50)
    assert check.field_residual < 1e-12
    assert check.max_deviation < 1e-9


def test_conjugacy_rejects_actions_outside_the_scaled_ball():
    mech = _mechanical()
    with pytest.raises(ValueError, match=r"I\(0\)"):
        verify_scaling_conjugacy(mech, 1.0, State([0.2, 0.7], [0.9, -1.2]),
                                 10.0, StepperSpec("yoshida4", 0.01))


def test_scaled_drift_experiment_bookkeeping():
    mech = _mechanical(amplitude=1.0)
    rule = HorizonRule(kind="power", t0=1.0, q=0.5, cap_steps=10**4)
    result = theorem2_experiment(mech, [2.0, 3.0, 4.0], seeds=[0],
                                 horizon_rule=rule,
                                 spec=StepperSpec("yoshida4", 0.01),
                                 master_seed=3)
    assert [r.R for r in result.records] == [2.0, 3.0, 4.0]
    for rec in result.records:
        assert rec.error is None
        assert rec.epsilon == rec.R ** (-2.0)
        # original-variable drift is exact bookkeeping, not a re-run
        assert rec.drift_original == rec.R * rec.drift_scaled
    assert result.n == 2 and result.p == 2
    assert result.slope_prediction == 0.5
    assert math.isfinite(result.fit.slope)

    again = theorem2_experiment(mech, [2.0, 3.0, 4.0], seeds=[0],
                                horizon_rule=rule,
                                spec=StepperSpec("yoshida4", 0.01),
                                master_seed=3)
    assert json.dumps(result.to_dict(), sort_keys=True) == json.dumps(
        again.to_dict(), sort_keys=True
    )


def test_scaled_drift_grid_validation():
    mech = _mechanical()
    with pytest.raises(ValueError, match=">= 1"):
        theorem2_experiment(mech, [0.5, 2.0, 3.0], seeds=[0])
    with pytest.raises(ValueError, match="strictly increasing"):
        theorem2_experiment(mech, [2.0, 2.0, 3.0], seeds=[0])


# ---------------------------------------------------------------------------
# reference exponent table
# ---------------------------------------------------------------------------


def test_reference_exponents_by_regime():
    convex = predicted_exponents(2, "convex")
    assert (convex["a"], convex["b"]) == (0.25, 0.25)
    assert convex["status"] == "reference"

    periodic = predicted_exponents(2, "periodic")
    assert periodic["a"] == pytest.approx(1.0 / 6.0, abs=1e-15)

    quasi = predicted_exponents(2, "quasiperiodic", tau=1.0)
    assert quasi["a"] == 0.125
    assert quasi["status"] == "conjectural"

    mech = predicted_exponents(2, "mechanical", p=3)
    assert (mech["a"], mech["b"]) == (0.75, 0.75)
    assert mech["drift_vs_R_slope"] == 0.25
    assert mech["status"] == "conjectural"


def test_reference_exponent_errors():
    with pytest.raises(ValueError, match="unknown case"):
        predicted_exponents(2, "chaotic")
    with pytest.raises(ValueError, match="tau"):
        predicted_exponents(2, "quasiperiodic")
    with pytest.raises(ValueError, match="power p"):
        predicted_exponents(2, "mechanical")
    with pytest.raises(ValueError, match=">= 2"):
        predicted_exponents(2, "mechanical", p=1)
    with pytest.raises(ValueError, match=">= 1"):
        predicted_exponents(0, "convex")


# ---------------------------------------------------------------------------
# tabular exports
# ---------------------------------------------------------------------------


def test_drift_csv_layout_and_determinism(tmp_path):
    records = [
        DriftRecord(epsilon=1e-2, c=0.5, seed=0, T=10.0, dt=0.01,
                    sup_drift=0.125, exit_time=None, censored=True,
                    threshold=1.0),
        DriftRecord(epsilon=1e-3, c=0.5, seed=1, T=10.0, dt=0.01,
                    sup_drift=1.0 / 3.0, exit_time=2.5, censored=False,
                    threshold=0.25),
    ]
    path = tmp_path / "records.csv"
    drift_records_to_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epsilon,c,seed,T,dt,sup_drift,exit_time,censored"
    assert lines[1] == "0.01,0.5,0,10.0,0.01,0.125,,true"
    assert lines[2] == "0.001,0.5,1,10.0,0.01,0.3333333333333333,2.5,false"

    again = tmp_path / "again.csv"
    drift_records_to_csv(records, again)
    assert path.read_bytes() == again.read_bytes()


def test_theorem2_csv_layout(tmp_path):
    mech = _mechanical(amplitude=1.0)
    rule = HorizonRule(kind="power", t0=1.0, q=0.5, cap_steps=10**3)
    result = theorem2_experiment(mech, [2.0, 4.0, 8.0], seeds=[0],
                                 horizon_rule=rule,
                                 spec=StepperSpec("yoshida4", 0.01))
    path = tmp_path / "scaling.csv"
    theorem2_to_csv(result, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "R,p,epsilon,drift_scaled,drift_original,slope_prediction"
    assert len(lines) == 4
    first = lines[1].split(",")
    assert first[0] == "2.0" and first[1] == "2"
    assert float(first[4]) == 2.0 * float(first[3])
    assert first[5] == "0.5"
