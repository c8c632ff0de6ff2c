import math

import numpy as np
import pytest

from nekhlab.autonomize import (
    ExtendedState,
    ExtendedSystem,
    autonomize_periodic,
    autonomize_quasiperiodic,
    autonomize_slow,
    diophantine_estimate,
    diophantine_scan,
    extend_state,
    verify_autonomization,
)
from nekhlab.hamcore import (
    Envelope,
    Mode,
    MultiPoly,
    Perturbation,
    PowerLaw,
    SlowSystem,
    State,
    stream_rng,
)
from nekhlab.integrators import StepperSpec, integrate

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def _one_mode_system(eps, c, amplitude=0.5, envelope=None):
    env = envelope if envelope is not None else Envelope()
    f = Perturbation((Mode.simple([1, 0], amplitude, 0.0, env),))
    return SlowSystem(PowerLaw(2, 2, radius=1.0), f, eps, c)


# ---------------------------------------------------------------------------
# slow-time extension
# ---------------------------------------------------------------------------


def test_extended_energy_includes_conjugate_term():
    sys0 = _one_mode_system(0.01, 0.5, amplitude=0.0)
    ext = autonomize_slow(sys0)
    st = ExtendedState([0.1, 0.2], [0.3, 0.4], x=7.7, y=3.0)
    assert ext.hamiltonian(st) - sys0.h.value(st.action) == pytest.approx(0.3, rel=1e-14)


def test_extend_state_gauge():
    sys1 = _one_mode_system(0.04, 0.5)
    st = extend_state(sys1, State([0.3, 0.6], [0.1, 0.2], time=5.0))
    assert st.y == 0.0
    assert st.x == pytest.approx(sys1.epsilon**0.5 * 5.0, rel=1e-15)


def test_extended_field_matches_closed_forms():
    """(dtheta, dI, dx, dy) match the canonical equations componentwise."""
    action_poly = MultiPoly([[1, 0], [0, 0]], [0.3, 0.5])
    f = Perturbation((Mode(np.array([1, -1]), action_poly, 0.2, Envelope("cosine", 0.7)),))
    sys1 = SlowSystem(PowerLaw(2, 2), f, 0.04, 1.0)
    ext = autonomize_slow(sys1)
    rng = stream_rng(21, 0, 0, 0)
    for _ in range(20):
        st = ExtendedState(rng.random(2), rng.random(2) - 0.5,
                           x=rng.normal(), y=rng.normal())
        dtheta, daction, dx, dy = ext.vector_field(st)
        _, ftheta, faction, ftau = f.derivatives(st.theta, st.action, st.x)
        assert np.array_equal(dtheta, sys1.h.grad(st.action) + 0.04 * faction)
        assert np.array_equal(daction, -0.04 * ftheta)
        assert dx == 0.04
        assert dy == -0.04 * ftau


def test_extended_field_free_limit():
    sys0 = _one_mode_system(0.09, 0.5, amplitude=0.0)
    ext = autonomize_slow(sys0)
    dtheta, daction, dx, dy = ext.vector_field(ExtendedState([0.1, 0.9], [0.5, -0.25]))
    assert np.array_equal(dtheta, [1.0, -0.5])
    assert np.array_equal(daction, [0.0, 0.0])
    assert dx == pytest.approx(0.3, rel=1e-15)
    assert dy == 0.0


def test_dx_is_state_independent():
    sys1 = _one_mode_system(0.25, 0.5)
    ext = autonomize_slow(sys1)
    rng = stream_rng(21, 1, 0, 0)
    vals = {ext.vector_field(ExtendedState(rng.random(2), rng.random(2),
                                           x=rng.normal(), y=rng.normal()))[2]
            for _ in range(10)}
    assert vals == {0.5}


def test_dy_matches_finite_difference_in_x():
    f = Perturbation((Mode.simple([2, 1], 0.8, 0.3, Envelope("sech", 0.9)),))
    sys1 = SlowSystem(PowerLaw(2, 2), f, 0.05, 0.5)
    ext = autonomize_slow(sys1)
    rng = stream_rng(21, 2, 0, 0)
    step = 1e-5
    for _ in range(20):
        st = ExtendedState(rng.random(2), rng.random(2), x=rng.normal(), y=0.0)
        dy = ext.vector_field(st)[3]
        fd = (f.value(st.theta, st.action, st.x + step)
              - f.value(st.theta, st.action, st.x - step)) / (2 * step)
        assert abs(dy - (-0.05 * fd)) / max(1.0, abs(dy)) < 1e-6


def test_x_advances_linearly_along_the_flow():
    sys1 = _one_mode_system(1e-4, 0.5)
    ext = autonomize_slow(sys1)
    st0 = extend_state(sys1, State([0.15, 0.3], [0.4, -0.2]))
    traj = integrate(ext, st0, 100.0, StepperSpec("yoshida4", 0.01), stride=100)
    expected = sys1.epsilon**0.5 * traj.times
    assert np.max(np.abs(traj.xs - expected)) < 1e-12


# ---------------------------------------------------------------------------
# exactness of the reduction
# ---------------------------------------------------------------------------


def test_verify_autonomization_free_system_is_exact():
    sys0 = _one_mode_system(0.0, 0.5)
    check = verify_autonomization(sys0, State([0.2, 0.8], [0.4, 0.1]), 10.0)
    assert check.deviation == 0.0
    assert check.form == "slow_time"


def test_verify_autonomization_small_run():
    sys1 = _one_mode_system(1e-3, 0.5, envelope=Envelope("cosine", 1.0))
    check = verify_autonomization(sys1, State([0.15, 0.3], [0.4, -0.2]), 50.0,
                                  StepperSpec("implicit_midpoint", 0.01), stride=10)
    assert check.deviation < 1e-9
    assert check.steps == 5000
    assert check.energy_drift < 1e-6
    d = check.to_dict()
    assert set(d) == {"form", "deviation", "energy_drift", "steps"}


def test_verify_autonomization_rejects_splitting_spec():
    sys1 = _one_mode_system(1e-3, 0.5)
    with pytest.raises(ValueError, match="implicit_midpoint"):
        verify_autonomization(sys1, State([0.1, 0.2], [0.3, 0.4]), 1.0,
                              StepperSpec("yoshida4", 0.01))


# ---------------------------------------------------------------------------
# torus extensions
# ---------------------------------------------------------------------------


def test_periodic_extension_layout():
    h = PowerLaw(2, 2)
    f = Perturbation((Mode.simple([1, 0], 0.5, 0.0, Envelope("cosine", 2.0)),))
    ext = autonomize_periodic(h, f, 0.1)
    assert ext.form == "periodic"
    assert ext.n_forcing_angles == 1
    angles = np.array([0.1, 0.2, 0.6])
    actions = np.array([0.3, -0.1, 0.0])
    dangles, dactions = ext.combined_vector_field(angles, actions)
    _, ftheta, faction, ftau = f.derivatives(angles[:2], actions[:2], angles[2])
    assert np.array_equal(dangles[:2], h.grad(actions[:2]) + 0.1 * faction)
    assert dangles[2] == 1.0
    assert np.array_equal(dactions[:2], -0.1 * ftheta)
    assert dactions[2] == -0.1 * ftau


def test_periodic_extension_rejects_aperiodic_envelopes():
    h = PowerLaw(2, 2)
    for env in (Envelope("cosine", 0.5), Envelope("sech", 1.0), Envelope("ramp", 1.0)):
        f = Perturbation((Mode.simple([1, 0], 0.5, 0.0, env),))
        with pytest.raises(ValueError, match="periodic"):
            autonomize_periodic(h, f, 0.1)


def test_form_guards():
    sys1 = _one_mode_system(0.1, 0.5)
    slow = autonomize_slow(sys1)
    with pytest.raises(ValueError, match="vector_field"):
        slow.combined_vector_field(np.zeros(3), np.zeros(3))
    per = autonomize_periodic(PowerLaw(2, 2), Perturbation((Mode.simple([1, 0], 0.5),)), 0.1)
    with pytest.raises(ValueError, match="slow_time"):
        per.vector_field(ExtendedState([0.0, 0.0], [0.0, 0.0]))
    with pytest.raises(ValueError):
        ExtendedSystem(sys1, form="woven")


def test_quasiperiodic_extension():
    h = PowerLaw(2, 2)
    # combined torus: 2 system angles + 1 forcing angle
    f_ext = Perturbation((Mode.simple([1, 0, 1], 0.4), Mode.simple([0, 1, -1], 0.3),))
    omega = np.array([GOLDEN])
    ext = autonomize_quasiperiodic(h, f_ext, 0.05, omega, tau=0.0, kmax=10)
    assert ext.form == "quasi_periodic"
    # m=1, tau=0: the minimizer is k=1, so the estimate is omega itself
    assert ext.dioph_gamma == pytest.approx(GOLDEN)
    angles = np.array([0.15, 0.3, 0.45])
    actions = np.array([0.2, -0.2, 0.0])
    dangles, dactions = ext.combined_vector_field(angles, actions)
    _, ftheta, faction, _ = f_ext.derivatives(angles, actions, 0.0)
    assert np.array_equal(dangles, np.concatenate([h.grad(actions[:2]), omega]) + 0.05 * faction)
    assert np.array_equal(dactions, -0.05 * ftheta)


def test_quasiperiodic_validation():
    h = PowerLaw(2, 2)
    omega = np.array([GOLDEN])
    with pytest.raises(ValueError, match="envelope"):
        autonomize_quasiperiodic(
            h, Perturbation((Mode.simple([1, 0, 1], 0.4, 0.0, Envelope("cosine", 1.0)),)),
            0.05, omega, tau=0.0)
    bad_poly = Mode(np.array([1, 0, 1]), MultiPoly([[0, 0, 1]], [0.4]))
    with pytest.raises(ValueError, match="forcing"):
        autonomize_quasiperiodic(h, Perturbation((bad_poly,)), 0.05, omega, tau=0.0)
    with pytest.raises(ValueError, match="dimension"):
        autonomize_quasiperiodic(
            h, Perturbation((Mode.simple([1, 0, 1, 1], 0.4),)), 0.05, omega, tau=0.0)


# ---------------------------------------------------------------------------
# small divisors
# ---------------------------------------------------------------------------


def test_diophantine_single_frequency():
    gamma, kmin = diophantine_estimate([1.0], tau=0.0, kmax=7)
    assert gamma == 1.0
    assert np.array_equal(kmin, [1])


def test_diophantine_resonant_pair():
    gamma, kmin = diophantine_estimate([1.0, 1.0], tau=1.0, kmax=1)
    assert gamma == 0.0
    assert np.array_equal(kmin, [1, -1])


def test_diophantine_golden_ratio():
    """The (1, golden-ratio) pair is the classically robust frequency vector."""
    gamma30, _ = diophantine_estimate([1.0, GOLDEN], tau=1.0, kmax=30)
    gamma50, kmin = diophantine_estimate([1.0, GOLDEN], tau=1.0, kmax=50)
    assert gamma30 == pytest.approx(0.6180339887498949, abs=1e-15)
    assert gamma50 == gamma30
    assert np.array_equal(kmin, [1, -1])


def test_diophantine_monotone_in_kmax():
    omega = [1.0, math.sqrt(2.0)]
    values = [diophantine_estimate(omega, tau=1.0, kmax=k)[0] for k in range(1, 13)]
    assert all(a >= b for a, b in zip(values, values[1:]))


def test_diophantine_validation():
    with pytest.raises(ValueError):
        diophantine_estimate([1.0, GOLDEN], tau=1.0, kmax=0)
    with pytest.raises(ValueError, match="scan"):
        diophantine_estimate(np.ones(5), tau=4.0, kmax=50)


def test_diophantine_scan_rows():
    rows = diophantine_scan([1.0, 1.0], tau=1.0, kmax_list=[1, 2])
    assert rows == [
        {"K": 1, "gamma_hat": 0.0, "k_min": "1 -1"},
        {"K": 2, "gamma_hat": 0.0, "k_min": "1 -1"},
    ]
