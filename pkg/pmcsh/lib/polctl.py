"""
Polarization control library
Gradient descent on the EPC retardances minimizing the monitor photodetector reading, which expels
the strong carrier from the signal port into the LO port.
"""
from dataclasses import dataclass, field as dataclass_field
import logging

import numpy as np

from .channel import drift_step
from .field import JonesOperator, coherency
from .rxfront import EpcState, MonitorPhotodiode, ReceiverParams, epc_jones

logger = logging.getLogger(__name__)

NORMALIZATION_EPS = 1e-12

PERTURBATIONS = ('sequential', 'spsa')


@dataclass(frozen=True)
class ControllerParams:
    step_mu: float = 0.05
    dither_delta: float = 0.02
    loop_rate: float = 1000.0
    max_iters: int = 2000
    # dB change of the monitor power over `window` iterations
    converge_tol: float = 0.1
    window: int = 50
    monitor_averages: int = 32
    perturbation: str = 'sequential'

    def __post_init__(self):
        if not self.step_mu > 0:
            raise ValueError(f'Step must be positive, got {self.step_mu}.')
        if not self.dither_delta > 0:
            raise ValueError(f'Dither amplitude must be positive, got {self.dither_delta}.')
        if not self.loop_rate > 0:
            raise ValueError(f'Loop rate must be positive, got {self.loop_rate}.')
        if self.max_iters < 1:
            raise ValueError(f'Invalid iteration count: {self.max_iters}.')
        if not self.converge_tol > 0:
            raise ValueError(f'Convergence tolerance must be positive, got {self.converge_tol}.')
        if self.window < 2:
            raise ValueError(f'Convergence window must be at least 2 iterations, got {self.window}.')
        if self.monitor_averages < 1:
            raise ValueError(f'Invalid monitor averaging count: {self.monitor_averages}.')
        if self.perturbation not in PERTURBATIONS:
            raise ValueError(f'Invalid perturbation scheme "{self.perturbation}".')

    def readings_per_iteration(self, n_plates):
        # the reading at the operating point comes on top
        return 2 * n_plates if self.perturbation == 'sequential' else 2


@dataclass(frozen=True, eq=False)
class LinkContext:
    """
    Frequency-flat view of the received field for the control loop.
    The EPC, drift and PBS are frequency-flat, so every branch power is (M C M^H)[k, k] with C a
    coherency matrix of the field reaching the EPC.
    """
    received: np.ndarray
    clean: np.ndarray
    carrier: np.ndarray
    receiver: ReceiverParams = ReceiverParams()

    @classmethod
    def from_signals(cls, received, clean, carrier, receiver):
        return cls(coherency(received), coherency(clean), coherency(carrier), receiver)

    def _branch_powers(self, operator, matrix):
        out = operator.matrix @ matrix @ np.conj(operator.matrix.T)
        return float(np.real(out[0, 0])), float(np.real(out[1, 1]))

    def monitor_power(self, operator):
        return self.receiver.tap_ratio * self._branch_powers(operator, self.received)[0]

    def extinction_db(self, operator):
        # Without ASE: the noise floor is shared by both branches
        p_sig, p_lo = self._branch_powers(operator, self.clean)
        return extinction(p_lo, p_sig)

    def carrier_fraction(self, operator):
        p_sig, p_lo = self._branch_powers(operator, self.carrier)
        return p_lo / (p_sig + p_lo)


@dataclass(frozen=True, eq=False)
class ControllerTrace:
    monitor_mw: np.ndarray
    retardances: np.ndarray
    extinction_db: np.ndarray
    carrier_fraction: np.ndarray
    time_s: np.ndarray
    final_state: EpcState
    converged_at: int = None
    diverged: bool = False
    final_operator: JonesOperator = dataclass_field(default_factory=JonesOperator.identity)

    def __len__(self):
        return self.monitor_mw.size

    @property
    def iterations(self):
        return self.monitor_mw.size

    @property
    def converged(self):
        return self.converged_at is not None

    def duty_cycle(self, threshold_db=10.0):
        """
        Fraction of iterations after the first convergence with an extinction above `threshold_db`.
        """
        start = self.converged_at or 0
        tail = self.extinction_db[start:]
        if not tail.size:
            return 0.0
        return float(np.mean(tail >= threshold_db))


def extinction(p_lo, p_sig):
    if not p_lo > 0 or not p_sig > 0:
        raise ValueError(f'Extinction needs two positive branch powers, got {p_lo} and {p_sig}.')
    return 10 * np.log10(p_lo / p_sig)


def estimate_gradient(state, measure, delta):
    """
    Sequential central differences, one plate at a time: 2 readings per plate, plus then minus.
    """
    if not delta > 0:
        raise ValueError(f'Dither amplitude must be positive, got {delta}.')
    gradient = np.zeros(state.n_plates)
    for index in range(state.n_plates):
        shifted = state.retardances.copy()
        shifted[index] += delta
        p_plus = measure(state.with_retardances(shifted))
        shifted[index] -= 2 * delta
        p_minus = measure(state.with_retardances(shifted))
        gradient[index] = (p_plus - p_minus) / (2 * delta)
    return gradient


def estimate_gradient_spsa(state, measure, delta, gen):
    """
    Simultaneous perturbation along a random +-1 direction: 2 readings whatever the plate count.
    """
    if not delta > 0:
        raise ValueError(f'Dither amplitude must be positive, got {delta}.')
    direction = gen.choice((-1.0, 1.0), size=state.n_plates)
    p_plus = measure(state.with_retardances(state.retardances + delta * direction))
    p_minus = measure(state.with_retardances(state.retardances - delta * direction))
    return (p_plus - p_minus) / (2 * delta) * direction


def control_step(state, gradient, p):
    gradient = np.asarray(gradient, dtype=float)
    norm = np.linalg.norm(gradient)
    # Not wrapped, the controller is endless
    return state.with_retardances(state.retardances - p.step_mu * gradient / (norm + NORMALIZATION_EPS))


def _is_drifting(traj):
    return traj is not None and bool(np.any(traj.angles != traj.angles[0]))


def _window_change_db(values):
    values = np.maximum(values, np.finfo(float).tiny)
    return 10 * np.log10(np.max(values) / np.min(values))


def hold(link, state, traj=None):
    """
    Single evaluation without adaptation (manual control or control off).
    """
    operator = epc_jones(state)
    if traj is not None:
        operator = operator @ drift_step(traj, 0.0)
    return ControllerTrace(
        monitor_mw=np.array([link.monitor_power(operator)]),
        retardances=state.retardances.reshape(1, -1).copy(),
        extinction_db=np.array([link.extinction_db(operator)]),
        carrier_fraction=np.array([link.carrier_fraction(operator)]),
        time_s=np.zeros(1),
        final_state=state,
        final_operator=operator,
    )


def run_loop(link, p, traj=None, initial_state=None, rng=None):
    """
    Measure, gradient, step at `p.loop_rate` against the channel drifting along `traj`.
    The monitor is noiseless without `rng`. Stops at `p.max_iters`, or on convergence if the channel
    does not drift.
    """
    state = initial_state if initial_state is not None else EpcState.zeros()
    if traj is not None and (p.max_iters - 1) / p.loop_rate > traj.horizon * (1 + 1e-12):
        raise ValueError(f'The drift trajectory is shorter than {p.max_iters} iterations.')
    drifting = _is_drifting(traj)
    readings = p.readings_per_iteration(state.n_plates) + 1
    monitor = MonitorPhotodiode(
        link.receiver,
        gen=rng.stream('monitor'),
        n_avg=p.monitor_averages,
        interval=1 / (p.loop_rate * readings),
    ) if rng is not None else None
    spsa_gen = None
    if p.perturbation == 'spsa':
        if rng is None:
            raise ValueError('The SPSA perturbation needs a random source.')
        spsa_gen = rng.stream('spsa')

    monitor_mw, retardances, ext_db, fractions = [], [], [], []
    converged_at = None
    diverged = False
    above_initial = 0
    operator = epc_jones(state)
    for index in range(p.max_iters):
        drift = drift_step(traj, index / p.loop_rate) if traj is not None else JonesOperator.identity()

        def measure(candidate):
            power = link.monitor_power(epc_jones(candidate) @ drift)
            return monitor.read(power) if monitor is not None else power

        operator = epc_jones(state) @ drift
        reading = measure(state)
        monitor_mw.append(reading)
        retardances.append(state.retardances)
        ext_db.append(link.extinction_db(operator))
        fractions.append(link.carrier_fraction(operator))

        if reading > monitor_mw[0]:
            above_initial += 1
            if above_initial > p.window and not diverged:
                diverged = True
                logger.warning(f'Control loop diverging at iteration {index}: monitor power above its initial value.')
        else:
            above_initial = 0

        if len(monitor_mw) >= p.window and _window_change_db(monitor_mw[-p.window:]) < p.converge_tol:
            if converged_at is None:
                converged_at = index
                logger.info(f'Control loop converged at iteration {index}, extinction {ext_db[-1]:.2f} dB.')
            if not drifting:
                break

        if spsa_gen is not None:
            gradient = estimate_gradient_spsa(state, measure, p.dither_delta, spsa_gen)
        else:
            gradient = estimate_gradient(state, measure, p.dither_delta)
        state = control_step(state, gradient, p)

    if converged_at is None:
        logger.info(f'Control loop did not converge in {len(monitor_mw)} iterations.')
    # The last step is not applied on the field, the recorded state is
    final_state = EpcState(retardances[-1], state.axes, state.volts_per_rad)
    return ControllerTrace(
        monitor_mw=np.array(monitor_mw),
        retardances=np.array(retardances),
        extinction_db=np.array(ext_db),
        carrier_fraction=np.array(fractions),
        time_s=np.arange(len(monitor_mw)) / p.loop_rate,
        final_state=final_state,
        converged_at=converged_at,
        diverged=diverged,
        final_operator=operator,
    )
