import csv
import math

import numpy as np
import pytest

from dwellcert.core.constants import (
    DisturbancePolicy,
    FlowKind,
    SimulationStatus,
    SwitchPolicy,
)
from dwellcert.core.errors import DwellTimeWarning, ValidationError
from dwellcert.core.flowmap import FlowMapHandle
from dwellcert.core.sim import (
    SwitchEvent,
    SwitchingSignal,
    gen_disturbance,
    gen_switching,
    monitor_iss_bound,
    simulate_closed_loop,
    warn_below_dwell,
    write_switch_events,
    write_trajectory,
)
from tests.unit.test_core.testcertificates import controller_net, handbuilt_bundle


class HeldInputFlow(FlowMapHandle):
    """Hides a builtin flow map behind the plain handle interface, so the
    simulation holds the control over each step."""

    kind = FlowKind.EXTERNAL

    def __init__(self, inner):
        super().__init__(inner.mode, inner.n, inner.m)
        self.inner = inner

    def _advance(self, xs, us, dt):
        return self.inner.step_batch(xs, us, dt)


class NanFlow(FlowMapHandle):
    kind = FlowKind.EXTERNAL

    def _advance(self, xs, us, dt):
        return np.full_like(xs, np.nan)


@pytest.fixture
def no_disturbance(linear1):
    return gen_disturbance(linear1.dist_box, 2.0)


@pytest.fixture
def two_mode_run(linear2, bundle2, flows2):
    switching = gen_switching(0.5, 2.0, 2)
    disturbance = gen_disturbance(linear2.dist_box, 2.0)
    return simulate_closed_loop(
        linear2, bundle2, [0.8], switching, disturbance, 2.0, 0.01, flows2
    )


def test_round_robin_switching():
    signal = gen_switching(0.5, 2.0, 2)
    assert signal.times == (0.5, 1.0, 1.5)
    assert signal.modes == (1, 2, 1, 2)
    assert signal.mode_at(0.0) == 1
    assert signal.mode_at(0.49) == 1
    assert signal.mode_at(0.5) == 2
    assert signal.mode_at(10.0) == 2
    assert gen_switching(0.5, 2.0, [4, 7, 9]).modes == (4, 7, 9, 4)


def test_random_switching():
    signal = gen_switching(0.5, 20.0, 3, SwitchPolicy.RANDOM, seed=3)
    gaps = np.diff((0.0, *signal.times))
    assert len(signal.times) >= 10
    assert np.all(gaps >= 0.5)
    assert np.all(gaps <= 1.0 + 1e-12)
    assert signal.times[-1] < 20.0
    assert all(a != b for a, b in zip(signal.modes, signal.modes[1:]))
    assert set(signal.modes) == {1, 2, 3}
    again = gen_switching(0.5, 20.0, 3, "seeded-random", seed=3)
    assert again == signal
    assert gen_switching(0.5, 20.0, 3, SwitchPolicy.RANDOM, seed=4) != signal


def test_single_mode_never_switches():
    signal = gen_switching(0.1, 5.0, 1, SwitchPolicy.RANDOM)
    assert signal.times == ()
    assert signal.modes == (1,)


def test_switching_validation():
    with pytest.raises(ValidationError, match="tau_d must be positive"):
        gen_switching(0.0, 2.0, 2)
    with pytest.raises(ValidationError, match="horizon must be positive"):
        gen_switching(0.5, math.inf, 2)
    with pytest.raises(ValueError, match="Invalid value"):
        gen_switching(0.5, 2.0, 2, "sometimes")
    with pytest.raises(ValidationError, match="less than the dwell time"):
        SwitchingSignal((0.5, 0.7), (1, 2, 1), 0.5)
    with pytest.raises(ValidationError, match="consecutive modes must differ"):
        SwitchingSignal((0.5,), (1, 1), 0.5)
    with pytest.raises(ValidationError, match="1 switches need 2 modes"):
        SwitchingSignal((0.5,), (1, 2, 1), 0.5)


def test_disturbance_policies(linear1):
    box = linear1.dist_box
    zero = gen_disturbance(box, 2.0)
    assert zero.policy == DisturbancePolicy.ZERO
    assert zero(1.3).tolist() == [0.0]
    assert zero.sup_norm == 0.0

    constant = gen_disturbance(box, 2.0, "constant")
    assert constant(0.0).tolist() == [0.1]
    assert gen_disturbance(box, 2.0, "constant", value=[-0.05])(5.0).tolist() == [
        -0.05
    ]

    piecewise = gen_disturbance(box, 2.0, "piecewise-constant", seed=1, hold=0.5)
    assert piecewise.values.shape == (4, 1)
    assert np.all(box.contains(piecewise.values))
    np.testing.assert_array_equal(piecewise(0.6), piecewise.values[1])
    np.testing.assert_array_equal(piecewise(100.0), piecewise.values[-1])
    again = gen_disturbance(box, 2.0, "piecewise-constant", seed=1, hold=0.5)
    np.testing.assert_array_equal(again.values, piecewise.values)


def test_disturbance_validation(linear1):
    with pytest.raises(ValidationError, match="is not in"):
        gen_disturbance(linear1.dist_box, 2.0, "constant", value=[0.5])
    with pytest.raises(ValidationError, match="must have dimension 1"):
        gen_disturbance(linear1.dist_box, 2.0, "constant", value=[0.0, 0.0])
    with pytest.raises(ValidationError, match="hold must be positive"):
        gen_disturbance(linear1.dist_box, 2.0, "piecewise-constant", hold=0.0)


def test_simulate_single_mode(linear1, bundle1, flows1, no_disturbance):
    switching = gen_switching(0.5, 2.0, 1)
    trajectory = simulate_closed_loop(
        linear1, bundle1, [0.8], switching, no_disturbance, 2.0, 0.01, flows1
    )
    assert trajectory.status == SimulationStatus.COMPLETED
    assert len(trajectory) == 201
    assert trajectory.times[-1] == pytest.approx(2.0)
    # u = w = 0, so x(t) = 0.8 exp(-t)
    np.testing.assert_allclose(
        trajectory.states[:, 0], 0.8 * np.exp(-trajectory.times), rtol=1e-8
    )
    assert trajectory.switches == []
    assert trajectory.unsafe_steps == 0
    assert np.all(np.diff(trajectory.V) < 0)
    assert trajectory.controls.shape == (201, 1)


def test_simulate_switches_on_the_grid(two_mode_run):
    trajectory = two_mode_run
    events = trajectory.switches
    assert [e.step for e in events] == [50, 100, 150]
    assert [(e.from_mode, e.to_mode) for e in events] == [(1, 2), (2, 1), (1, 2)]
    assert events[0].time == pytest.approx(0.5)
    # both modes share the same V
    assert [e.ratio for e in events] == [1.0, 1.0, 1.0]
    assert trajectory.modes[49] == 1
    assert trajectory.modes[50] == 2
    # decay 1 on two intervals and 2 on the other two
    assert trajectory.states[-1, 0] == pytest.approx(0.8 * math.exp(-3.0), rel=1e-8)


def test_simulate_with_held_control(linear1, bundle1, flows1, no_disturbance):
    switching = gen_switching(0.5, 2.0, 1)
    flows = {1: HeldInputFlow(flows1[1])}
    trajectory = simulate_closed_loop(
        linear1, bundle1, [0.8], switching, no_disturbance, 2.0, 0.01, flows
    )
    assert trajectory.states[-1, 0] == pytest.approx(0.8 * math.exp(-2.0), rel=1e-8)


def test_simulate_escape(linear1, flows1, no_disturbance):
    # u = 5 x turns the loop into x' = 4 x
    bundle = handbuilt_bundle(controller=controller_net((5.0, 0.0)))
    switching = gen_switching(0.5, 2.0, 1)
    trajectory = simulate_closed_loop(
        linear1, bundle, [0.5], switching, no_disturbance, 2.0, 0.01, flows1
    )
    assert trajectory.status == SimulationStatus.ESCAPED
    # 0.5 exp(4 t) reaches 2 at t = ln(4) / 4
    assert trajectory.times[-1] == pytest.approx(math.log(4) / 4, abs=0.011)
    assert trajectory.states[-1, 0] > 2.0
    assert np.all(trajectory.states[:-1, 0] <= 2.0)
    assert trajectory.unsafe_steps > 0
    assert len(trajectory.V) == len(trajectory)


def test_simulate_non_finite(linear1, bundle1, no_disturbance):
    switching = gen_switching(0.5, 2.0, 1)
    trajectory = simulate_closed_loop(
        linear1,
        bundle1,
        [0.5],
        switching,
        no_disturbance,
        2.0,
        0.01,
        {1: NanFlow(1, 1, 1)},
    )
    assert trajectory.status == SimulationStatus.NON_FINITE
    assert len(trajectory) == 1


def test_simulate_validation(linear1, bundle1, flows1, no_disturbance):
    switching = gen_switching(0.5, 2.0, 1)
    with pytest.raises(ValidationError, match="must be a point of the state box"):
        simulate_closed_loop(
            linear1, bundle1, [1.5], switching, no_disturbance, 2.0, 0.01, flows1
        )
    with pytest.raises(ValidationError, match="dt must be positive"):
        simulate_closed_loop(
            linear1, bundle1, [0.5], switching, no_disturbance, 2.0, 0.0, flows1
        )
    with pytest.raises(ValidationError, match=r"unknown modes \[2\]"):
        simulate_closed_loop(
            linear1,
            bundle1,
            [0.5],
            gen_switching(0.5, 2.0, 2),
            no_disturbance,
            2.0,
            0.01,
            flows1,
        )


def test_warn_below_dwell():
    assert warn_below_dwell(0.5, None) is False
    assert warn_below_dwell(1.0, 0.93) is False
    with pytest.warns(DwellTimeWarning, match="does not exceed"):
        assert warn_below_dwell(0.9, 0.93) is True
    with pytest.warns(DwellTimeWarning):
        assert warn_below_dwell(0.93, 0.93) is True


def test_monitor_iss_bound(two_mode_run, bundle2):
    monitor = monitor_iss_bound(two_mode_run, bundle2, zeta=1.0, kappa=1.0, tau_d=0.5)
    assert monitor.passed
    assert monitor.min_margin > 0
    assert monitor.rho == pytest.approx(math.exp(-0.5))
    assert monitor.decay == pytest.approx(1.0)
    assert monitor.gain == pytest.approx(1 / (1 - math.exp(-0.5)) + 1)
    assert monitor.w_norm == 0.0
    # alpha_2(|x(0)|) = 2 * 0.8^2
    assert monitor.margins[0] == pytest.approx(1.28 - float(two_mode_run.V[0]))
    data = monitor.to_dict()
    assert data["max_switch_ratio"] == 1.0
    assert data["switch_ratio_within_zeta"] is True
    assert data["unsafe_steps"] == 0


def test_monitor_needs_dwell_time_above_bound(two_mode_run, bundle2):
    with pytest.raises(ValidationError, match="choose a dwell time"):
        monitor_iss_bound(two_mode_run, bundle2, zeta=2.0, kappa=1.0, tau_d=0.5)


def test_switch_event_ratio():
    event = SwitchEvent(0.5, 50, 1, 2, V_before=0.5, V_after=1.0)
    assert event.ratio == 2.0
    assert SwitchEvent(0.5, 50, 1, 2, 0.0, 0.0).ratio == 1.0
    assert SwitchEvent(0.5, 50, 1, 2, 0.0, 1.0).ratio == math.inf


def test_write_trajectory(tmp_path, two_mode_run, bundle2):
    path = write_trajectory(two_mode_run, tmp_path / "simulation" / "trajectory.csv")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert rows[0] == [
        "t",
        "x1",
        "mode",
        "w1",
        "u1",
        "V_active",
        "h",
        "iss_margin",
        "safe",
    ]
    assert len(rows) == 1 + len(two_mode_run)
    assert rows[1][:3] == ["0.0", "0.8", "1"]
    assert rows[1][7] == ""
    assert rows[1][8] == "true"

    monitor = monitor_iss_bound(two_mode_run, bundle2, 1.0, 1.0, 0.5)
    write_trajectory(two_mode_run, path, monitor)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    assert float(rows[1][7]) == pytest.approx(monitor.margins[0])


def test_write_switch_events(tmp_path, two_mode_run):
    path = write_switch_events(
        two_mode_run.switches, tmp_path / "simulation" / "switch_events.csv"
    )
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header = ["t", "step", "from_mode", "to_mode", "V_before", "V_after", "ratio"]
    assert rows[0] == header
    assert [row[1:4] for row in rows[1:]] == [
        ["50", "1", "2"],
        ["100", "2", "1"],
        ["150", "1", "2"],
    ]
    assert rows[1][6] == "1.0"


def test_fast_switching_with_shared_lyapunov_function(trained_shared, linear2, flows2):
    # zeta = 1, so any positive dwell time is above the bound
    bundle = trained_shared.bundle
    zeta = trained_shared.zeta.value
    switching = gen_switching(0.05, 5.0, 2)
    disturbance = gen_disturbance(
        linear2.dist_box, 5.0, DisturbancePolicy.PIECEWISE, seed=1, hold=0.25
    )
    trajectory = simulate_closed_loop(
        linear2, bundle, [0.8], switching, disturbance, 5.0, 0.01, flows2
    )
    assert trajectory.status == SimulationStatus.COMPLETED
    assert len(trajectory.switches) >= 98
    assert np.all(linear2.state_box.contains(trajectory.states))

    monitor = monitor_iss_bound(trajectory, bundle, zeta, bundle.kappa_min, 0.05)
    assert monitor.rho < 1
    assert monitor.passed, f"min ISS margin {monitor.min_margin}"
    assert monitor.max_switch_ratio == pytest.approx(1.0)
