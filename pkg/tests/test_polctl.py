import numpy as np
import pytest

from pmcsh.lib import polctl as polctl_lib
from pmcsh.lib.channel import SopTrajectory, linear_rotation, random_unitary
from pmcsh.lib.field import JonesOperator, Rng
from pmcsh.lib.polctl import ControllerParams, ControllerTrace, LinkContext
from pmcsh.lib.rxfront import EpcState, ReceiverParams, epc_jones

SIGNAL_MW = 0.3
CARRIER_MW = 5.0
IDEAL_EXTINCTION = 10 * np.log10(CARRIER_MW / SIGNAL_MW)


def make_link(rotation):
    u = rotation.matrix
    clean = u @ np.diag([SIGNAL_MW, CARRIER_MW]) @ np.conj(u.T)
    carrier = u @ np.diag([0.0, CARRIER_MW]) @ np.conj(u.T)
    return LinkContext(clean, clean, carrier, ReceiverParams())


@pytest.fixture
def mixed_link():
    return make_link(random_unitary(Rng(7), 'sop'))


def test_link_context_powers():
    link = make_link(JonesOperator.identity())
    identity = JonesOperator.identity()
    assert link.monitor_power(identity) == pytest.approx(0.1 * SIGNAL_MW)
    assert link.extinction_db(identity) == pytest.approx(IDEAL_EXTINCTION)
    assert link.carrier_fraction(identity) == pytest.approx(1.0)
    swap = JonesOperator([[0, 1], [1, 0]])
    assert link.extinction_db(swap) == pytest.approx(-IDEAL_EXTINCTION)
    assert link.carrier_fraction(swap) == pytest.approx(0.0, abs=1e-12)


def test_extinction():
    assert polctl_lib.extinction(10.0, 1.0) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        polctl_lib.extinction(1.0, 0.0)


def test_estimate_gradient_on_quadratic():
    target = np.array([0.3, -1.0, 2.0, 0.5])

    def measure(state):
        return float(np.sum((state.retardances - target) ** 2))

    state = EpcState([1.0, 1.0, 1.0, 1.0])
    gradient = polctl_lib.estimate_gradient(state, measure, 0.02)
    np.testing.assert_allclose(gradient, 2 * (state.retardances - target), atol=1e-9)
    with pytest.raises(ValueError):
        polctl_lib.estimate_gradient(state, measure, 0.0)


def test_estimate_gradient_spsa_is_unbiased():
    slope = np.array([1.0, -2.0, 0.5, 0.0])

    def measure(state):
        return float(slope @ state.retardances)

    gen = Rng(2).stream('spsa')
    state = EpcState.zeros()
    estimates = [polctl_lib.estimate_gradient_spsa(state, measure, 0.02, gen) for _ in range(2000)]
    np.testing.assert_allclose(np.mean(estimates, axis=0), slope, atol=0.2)
    for estimate in estimates[:20]:
        assert estimate @ slope >= 0


def test_control_step_is_normalized():
    params = ControllerParams(step_mu=0.05)
    state = polctl_lib.control_step(EpcState.zeros(), [3.0, 4.0, 0.0, 0.0], params)
    np.testing.assert_allclose(state.retardances, [-0.03, -0.04, 0, 0])
    # zero gradient does not move
    state = polctl_lib.control_step(EpcState.zeros(), np.zeros(4), params)
    np.testing.assert_array_equal(state.retardances, np.zeros(4))
    # no wrapping
    state = polctl_lib.control_step(EpcState([100.0, 0, 0, 0]), [1.0, 0, 0, 0], params)
    assert state.retardances[0] == pytest.approx(99.95)


def test_readings_per_iteration():
    assert ControllerParams().readings_per_iteration(4) == 8
    assert ControllerParams(perturbation='spsa').readings_per_iteration(4) == 2
    with pytest.raises(ValueError):
        ControllerParams(perturbation='newton')
    with pytest.raises(ValueError):
        ControllerParams(step_mu=0.0)


def test_run_loop_converges_on_static_channel(mixed_link):
    params = ControllerParams(max_iters=2000)
    trace = polctl_lib.run_loop(mixed_link, params)
    assert trace.converged
    assert trace.iterations < params.max_iters
    assert not trace.diverged
    assert trace.monitor_mw[-1] < trace.monitor_mw[0]
    assert trace.extinction_db[-1] >= IDEAL_EXTINCTION - 0.5
    assert trace.extinction_db[-1] <= IDEAL_EXTINCTION + 1e-9
    assert trace.carrier_fraction[-1] > 0.99
    assert trace.retardances.shape == (trace.iterations, 4)
    np.testing.assert_allclose(trace.time_s[:3], [0.0, 1e-3, 2e-3])
    np.testing.assert_array_equal(trace.final_state.retardances, trace.retardances[-1])
    # the reported operator is the one of the last reading
    assert mixed_link.monitor_power(trace.final_operator) == pytest.approx(trace.monitor_mw[-1])


def test_run_loop_with_noisy_monitor(mixed_link):
    trace = polctl_lib.run_loop(mixed_link, ControllerParams(max_iters=2000), rng=Rng(4))
    assert trace.extinction_db[-1] >= IDEAL_EXTINCTION - 0.5


def test_run_loop_spsa(mixed_link):
    params = ControllerParams(max_iters=3000, perturbation='spsa')
    with pytest.raises(ValueError):
        polctl_lib.run_loop(mixed_link, params)
    trace = polctl_lib.run_loop(mixed_link, params, rng=Rng(4))
    assert trace.monitor_mw[-1] < trace.monitor_mw[0]
    assert trace.extinction_db[-1] >= IDEAL_EXTINCTION - 1.0


def test_run_loop_is_deterministic(mixed_link):
    params = ControllerParams(max_iters=200)
    first = polctl_lib.run_loop(mixed_link, params, rng=Rng(4))
    second = polctl_lib.run_loop(mixed_link, params, rng=Rng(4))
    np.testing.assert_array_equal(first.monitor_mw, second.monitor_mw)
    np.testing.assert_array_equal(first.retardances, second.retardances)


def test_run_loop_flags_divergence():
    # the channel winds much faster than a tiny step can follow
    link = make_link(JonesOperator.identity())
    traj = SopTrajectory.winding(50.0, 1e-3, 300)
    trace = polctl_lib.run_loop(link, ControllerParams(step_mu=1e-4, max_iters=300, window=20), traj)
    assert trace.diverged
    assert trace.iterations == 300


def test_run_loop_trajectory_too_short(mixed_link):
    traj = SopTrajectory.winding(1.0, 1e-3, 10)
    with pytest.raises(ValueError):
        polctl_lib.run_loop(mixed_link, ControllerParams(max_iters=100), traj)


def test_hold():
    link = make_link(JonesOperator.identity())
    trace = polctl_lib.hold(link, EpcState.zeros())
    assert trace.iterations == 1
    assert not trace.converged
    assert trace.extinction_db[0] == pytest.approx(IDEAL_EXTINCTION)
    trace = polctl_lib.hold(link, EpcState([0, np.pi, 0, 0]), SopTrajectory.static(1e-3, 5))
    assert trace.extinction_db[0] == pytest.approx(-IDEAL_EXTINCTION)


def test_duty_cycle():
    trace = ControllerTrace(
        monitor_mw=np.ones(6),
        retardances=np.zeros((6, 4)),
        extinction_db=np.array([0.0, 5.0, 12.0, 9.0, 11.0, 13.0]),
        carrier_fraction=np.ones(6),
        time_s=np.arange(6) * 1e-3,
        final_state=EpcState.zeros(),
        converged_at=2,
    )
    assert trace.duty_cycle() == pytest.approx(0.75)
    assert trace.duty_cycle(threshold_db=12.0) == pytest.approx(0.5)
    assert len(trace) == 6


def test_run_loop_descends_on_static_channel():
    # elliptical mixing, most of the carrier starts on the monitored port
    rotation = JonesOperator(np.diag([1.0, np.exp(0.7j)]) @ linear_rotation(1.2).matrix)
    link = make_link(rotation)
    trace = polctl_lib.run_loop(link, ControllerParams(step_mu=0.02, max_iters=2000))
    assert trace.monitor_mw[0] == pytest.approx(0.1 * (SIGNAL_MW * np.cos(1.2) ** 2 + CARRIER_MW * np.sin(1.2) ** 2))
    assert np.all(np.diff(trace.monitor_mw) <= 1e-3 * trace.monitor_mw[0])
    assert trace.extinction_db[-1] >= IDEAL_EXTINCTION - 0.5


def test_run_loop_tracks_default_drift(mixed_link):
    # 1 rad/s random walk over 3 s
    traj = SopTrajectory.random_walk(1.0, 1e-3, 3000, Rng(21))
    trace = polctl_lib.run_loop(mixed_link, ControllerParams(max_iters=3000), traj, rng=Rng(5))
    assert trace.iterations == 3000
    assert not trace.diverged
    assert trace.duty_cycle() >= 0.95


def test_estimate_gradient_is_consistent_across_dithers(mixed_link):
    def measure(state):
        return mixed_link.monitor_power(epc_jones(state))

    gen = Rng(6).stream('points')
    for _ in range(20):
        state = EpcState(gen.uniform(0, 2 * np.pi, 4))
        coarse = polctl_lib.estimate_gradient(state, measure, 0.02)
        fine = polctl_lib.estimate_gradient(state, measure, 0.01)
        assert np.linalg.norm(coarse - fine) <= 0.02 * np.linalg.norm(fine)


def test_control_step_reaches_bowl_minimum():
    target = np.array([0.8, -2.5, 1.5, 3.0])

    def bowl(state):
        return float(np.sum((state.retardances - target) ** 2))

    params = ControllerParams(step_mu=0.05)
    state = EpcState.zeros()
    limit = int(10 * np.linalg.norm(target) / params.step_mu)
    for iteration in range(limit):
        if np.linalg.norm(state.retardances - target) < params.step_mu:
            break
        state = polctl_lib.control_step(state, polctl_lib.estimate_gradient(state, bowl, 0.02), params)
    assert np.linalg.norm(state.retardances - target) < params.step_mu
    assert iteration <= np.ceil(np.linalg.norm(target) / params.step_mu)
