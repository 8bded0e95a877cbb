"""Coupled qubit-cavity dynamics and the switching protocol.

The quantum state follows the Schrodinger equation for H_s(b) with the
effective field b = B_x - g x_a, and the cavity amplitude <a> follows
d<a>/dt = i D <a> - (kappa/2) <a> + i (eps - g X), X = <H_0>. Both are
advanced together by a fixed-step RK4 scheme.

Protocol: the control (drive amplitude or detuning) starts at a value whose
stationary state has b = B_x, jumps to an intermediate value at t = 0 and is
switched to its final value once b falls below a threshold placed under the
gap. The adiabaticity index is the ramp rate |db/dt| where b crosses the gap.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .errors import DegenerateGround, IntegrationError, InvalidInput
from .models import BdGModel, tfim_x_from_modes
from .spectral import DEGENERACY_TOL, gap_location
from .stationary import (
    CavityParams, Control, Stability, detuning_for_alpha, stationary_points,
)

log = logging.getLogger(__name__)

__all__ = [
    "Schedule", "Trajectory", "ProtocolResult", "cavity_rhs", "stationary_amplitude",
    "integrate_coupled", "evolve_driven", "excitation_probability", "ground_infidelity",
    "extract_ramp_rate", "lz_probability", "tfim_lz_modes", "run_protocol",
    "run_protocol_detuning", "run_linear_baseline", "default_dt", "tfim_x_from_modes",
]


# --------------------------------------------------------------------------
# cavity
# --------------------------------------------------------------------------


def cavity_rhs(a: complex, x: float, cavity: CavityParams) -> complex:
    return 1j * cavity.delta_c * a - 0.5 * cavity.kappa * a + 1j * (cavity.epsilon - cavity.g * x)


def stationary_amplitude(x: float, cavity: CavityParams) -> complex:
    """Fixed point of the cavity equation for a frozen operator average ``x``."""
    return 1j * (cavity.epsilon - cavity.g * x) / (cavity.kappa / 2 - 1j * cavity.delta_c)


def displacement(a: complex) -> float:
    return 2.0 * float(np.real(a))


# --------------------------------------------------------------------------
# backends
# --------------------------------------------------------------------------


class _DenseBackend:
    def __init__(self, model):
        self.model = model
        self.h0 = np.ascontiguousarray(model.h0, dtype=np.complex128)
        self.hc = np.ascontiguousarray(-model.ht_coeff * model.ht, dtype=np.complex128)

    def prepare(self, state):
        return np.ascontiguousarray(state, dtype=np.complex128)

    def coupled(self, state, a, n, dt, cav, stop_level):
        m = self.model
        return _kernels.dense_coupled(state, complex(a), int(n), float(dt), float(m.b_x), float(cav.g),
                                      self.h0, self.hc, float(cav.epsilon), float(cav.delta_c),
                                      float(cav.kappa), float(stop_level))

    def rates(self, state, a, cav):
        m = self.model
        return _kernels.dense_rates(state, complex(a), float(m.b_x), float(cav.g), self.h0, self.hc,
                                    float(cav.epsilon), float(cav.delta_c), float(cav.kappa))

    def driven(self, state, t0, n, dt, tt, bb):
        return _kernels.dense_driven(state, float(t0), int(n), float(dt), self.h0, self.hc, tt, bb)

    def norm_error(self, state):
        return abs(float(np.vdot(state, state).real) - 1.0)


class _BdGBackend:
    def __init__(self, model: BdGModel):
        self.model = model
        self.cosk = np.cos(model.modes)
        self.sink = np.sin(model.modes)

    def prepare(self, state):
        state = np.ascontiguousarray(state, dtype=np.complex128)
        if state.ndim != 2 or state.shape != (len(self.model.modes), 2):
            raise InvalidInput(f"BdG state must have shape ({len(self.model.modes)}, 2)")
        return state

    def coupled(self, state, a, n, dt, cav, stop_level):
        m = self.model
        return _kernels.bdg_coupled(state, complex(a), int(n), float(dt), float(m.n), float(m.b_x),
                                    float(cav.g), float(m.j0), self.cosk, self.sink, float(cav.epsilon),
                                    float(cav.delta_c), float(cav.kappa), float(stop_level))

    def rates(self, state, a, cav):
        m = self.model
        return _kernels.bdg_rates(state, complex(a), float(m.n), float(m.b_x), float(cav.g), float(m.j0),
                                  self.cosk, self.sink, float(cav.epsilon), float(cav.delta_c),
                                  float(cav.kappa))

    def driven(self, state, t0, n, dt, tt, bb):
        return _kernels.bdg_driven(state, float(t0), int(n), float(dt), float(self.model.j0), self.cosk,
                                   self.sink, tt, bb)

    def norm_error(self, state):
        return float(np.max(np.abs(np.sum(np.abs(state) ** 2, axis=1) - 1.0)))


def _backend(model):
    return _BdGBackend(model) if isinstance(model, BdGModel) else _DenseBackend(model)


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


def excitation_probability(model, state: np.ndarray, b_eff: float) -> float:
    """Weight outside the instantaneous ground state.

    Dense: 1 - |<G(b)|psi>|^2. BdG: sum_k |beta_k|^2 with beta_k the
    amplitude on the excited eigenvector of the k-th pair mode.
    """
    if isinstance(model, BdGModel):
        if model.gap(b_eff) < DEGENERACY_TOL * model.j0:
            raise DegenerateGround(f"pair mode degenerate at b={b_eff:.6g}")
        beta = np.sum(np.conj(model.excited_state(b_eff)) * state, axis=1)
        return float(np.sum(np.abs(beta) ** 2))
    w, v = np.linalg.eigh(model.hamiltonian(b_eff))
    if w[1] - w[0] < DEGENERACY_TOL * max(np.max(np.abs(w)), 1.0):
        raise DegenerateGround(f"ground state degenerate at b={b_eff:.6g}")
    overlap = np.vdot(v[:, 0], state)
    return float(min(max(1.0 - abs(overlap) ** 2, 0.0), 1.0))


def ground_infidelity(model, state: np.ndarray, b_eff: float) -> float:
    """1 - |<G(b)|psi>|^2 for either representation (product over pair modes for BdG)."""
    if isinstance(model, BdGModel):
        beta = np.sum(np.conj(model.excited_state(b_eff)) * state, axis=1)
        return float(1.0 - np.prod(1.0 - np.abs(beta) ** 2))
    return excitation_probability(model, state, b_eff)


def lz_probability(gap: float, rate: float) -> float:
    if rate < 0:
        raise InvalidInput("rate must be non-negative")
    if rate == 0:
        return 0.0
    return float(np.exp(-np.pi * gap**2 / (2 * rate)))


def tfim_lz_modes(model: BdGModel, rate: float) -> np.ndarray:
    """Per-mode Landau-Zener excitation for a linear sweep of b at ``rate``.

    Mode k has minimum splitting 2 J_0 sin k (half of which enters the
    formula as the gap); returned as a diagnostic next to sum_k |beta_k|^2.
    """
    return np.array([lz_probability(2 * model.j0 * np.sin(k), rate) for k in model.modes])


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant control for the switching protocol.

    ``mid`` is applied from t = 0, ``final`` replaces it at the first instant
    b drops below ``switch_threshold``. ``control`` says whether the values are
    drive amplitudes or detunings. ``initial`` only sets the starting
    stationary state. ``None`` entries are filled in by ``run_protocol``.
    """

    mid: float
    final: float | None = None
    initial: float | None = None
    switch_threshold: float | None = None
    control: Control = Control.EPSILON
    t_max: float = 1e5
    dt: float | None = None
    settle_tol: float = 0.01
    settle_rate: float = 1e-6
    settle_window: float | None = None
    sample_stride: int = 10

    def __post_init__(self):
        object.__setattr__(self, "control", Control(self.control))
        if self.dt is not None and not self.dt > 0:
            raise InvalidInput("dt must be positive")
        if self.dt is not None and not self.t_max > self.dt:
            raise InvalidInput("t_max must exceed dt")
        if self.sample_stride < 1:
            raise InvalidInput("sample_stride must be >= 1")


def default_dt(model, cavity: CavityParams, schedule: Schedule | None = None) -> float:
    scale = max(model.b_x, model.j0, cavity.kappa, abs(cavity.delta_c), model.frequency_scale)
    if schedule is not None and schedule.control is Control.DELTA_C:
        scale = max(scale, abs(schedule.mid), abs(schedule.final or 0.0))
    return 0.01 / scale


@dataclass(eq=False)
class Trajectory:
    t: np.ndarray
    a_re: np.ndarray
    a_im: np.ndarray
    x_a: np.ndarray
    x: np.ndarray
    b_eff: np.ndarray
    p_exc: np.ndarray
    final_state: np.ndarray | None = None
    final_amplitude: complex = 0j
    t_switch: float | None = None
    t_cross: float | None = None
    cross_rate: float = 0.0
    terminated: str = "timeout"
    max_norm_error: float = 0.0
    dt: float = 0.0
    b_mean: float | None = None

    def rows(self):
        return zip(self.t, self.a_re, self.a_im, self.x_a, self.x, self.b_eff, self.p_exc)


class _Recorder:
    def __init__(self, model, g: float, track_excitation: bool):
        self.model = model
        self.g = g
        self.track = track_excitation
        self.cols = [[] for _ in range(7)]

    def add(self, t, a, state, x):
        b = self.model.b_x - 2 * self.g * a.real
        p = excitation_probability(self.model, state, b) if self.track else float("nan")
        for col, v in zip(self.cols, (t, a.real, a.imag, 2 * a.real, x, b, p)):
            col.append(float(v))

    def arrays(self):
        return [np.asarray(c) for c in self.cols]


def integrate_coupled(model, state0, a0: complex, schedule: Schedule, cavity: CavityParams,
                      b_gap: float | None = None, track_excitation: bool = True) -> Trajectory:
    """Integrate qubits + cavity under ``schedule``.

    ``cavity`` supplies the fixed parameters; the scheduled control overrides
    its epsilon or delta_c. Crossing of ``b_gap`` (first, downward) and the
    switch are located inside the step by root finding on a partial RK4 step,
    so results converge with the integrator order. Integration stops at
    ``t_max`` or once b and the averaged operator X stop drifting.
    """
    be = _backend(model)
    state = be.prepare(state0)
    a = complex(a0)
    dt = schedule.dt if schedule.dt is not None else default_dt(model, cavity, schedule)
    g = cavity.g
    bx = model.b_x
    stride = schedule.sample_stride
    window = schedule.settle_window if schedule.settle_window is not None else 20.0 / cavity.kappa
    check_every = stride * max(1, int(round(window / 20 / (stride * dt))))
    n_window = max(2, int(round(window / (check_every * dt))))

    cav = cavity.with_control(schedule.control, schedule.mid)
    switch_level = -np.inf
    if schedule.final is not None and schedule.switch_threshold is not None:
        switch_level = schedule.switch_threshold
    switched = False
    crossed = b_gap is None
    stable_b = _stable_fields(model, cav)

    rec = _Recorder(model, g, track_excitation)
    x_now = model.x_expectation(state)
    rec.add(0.0, a, state, x_now)
    out = Trajectory(*([None] * 7), dt=dt)

    step = 0
    n_total = int(np.floor(schedule.t_max / dt + 1e-9))
    checks_b: list[float] = []
    checks_x: list[float] = []
    xint = 0.0
    bint = 0.0
    max_norm = be.norm_error(state)

    while step < n_total:
        next_sample = (step // stride + 1) * stride
        target = min(next_sample, n_total)
        stop_level = switch_level if switched or crossed else max(b_gap, switch_level)
        if switched:
            stop_level = -np.inf if crossed else b_gap
        state, a, done, xi, bi, flag = be.coupled(state, a, target - step, dt, cav, stop_level)
        step += done
        xint += xi
        bint += bi
        if flag == 2:
            raise IntegrationError("non-finite state; reduce dt", step * dt)
        if flag == 1:
            t0 = step * dt
            level = stop_level
            theta = _locate(be, state, a, dt, cav, bx, g, level)
            if not crossed and level == b_gap:
                s_c, a_c = _partial(be, state, a, theta * dt, cav)
                _, da, _ = be.rates(s_c, a_c, cav)
                out.t_cross = t0 + theta * dt
                out.cross_rate = abs(2 * g * da.real)
                crossed = True
                continue  # redo the step with the remaining stop level
            # switch inside this step: old control up to theta, new control after
            s_c, a_c = _partial(be, state, a, theta * dt, cav)
            cav = cavity.with_control(schedule.control, schedule.final)
            switched = True
            out.t_switch = t0 + theta * dt
            stable_b = _stable_fields(model, cav)
            s_n, a_n = _partial(be, s_c, a_c, (1 - theta) * dt, cav)
            xint += dt * model.x_expectation(s_n)
            bint += dt * (bx - 2 * g * a_n.real)
            if not crossed and b_gap is not None and bx - 2 * g * a_n.real < b_gap:
                # gap crossed after the switch within the same step
                th2 = _locate_partial(be, s_c, a_c, (1 - theta) * dt, cav, bx, g, b_gap)
                s2, a2 = _partial(be, s_c, a_c, th2, cav)
                _, da, _ = be.rates(s2, a2, cav)
                out.t_cross = out.t_switch + th2
                out.cross_rate = abs(2 * g * da.real)
                crossed = True
            state, a = s_n, a_n
            step += 1
            log.debug("switched control at t=%.6g", out.t_switch)
        if step % stride == 0 or step == n_total:
            x_now = model.x_expectation(state)
            rec.add(step * dt, a, state, x_now)
            max_norm = max(max_norm, be.norm_error(state))
        if step % check_every == 0:
            checks_b.append(bint / (check_every * dt))
            checks_x.append(xint / (check_every * dt))
            xint = 0.0
            bint = 0.0
            if _settled(checks_b, checks_x, n_window, window, schedule, model, switched, stable_b):
                out.terminated = "settled"
                out.b_mean = float(np.mean(checks_b[-n_window:]))
                if step % stride:
                    rec.add(step * dt, a, state, model.x_expectation(state))
                break

    (out.t, out.a_re, out.a_im, out.x_a, out.x, out.b_eff, out.p_exc) = rec.arrays()
    out.final_state = state
    out.final_amplitude = a
    out.max_norm_error = max(max_norm, be.norm_error(state))
    if out.terminated != "settled":
        out.b_mean = float(np.mean(checks_b[-n_window:])) if checks_b else float(out.b_eff[-1])
        log.warning("integration reached t_max=%.6g without settling", schedule.t_max)
    return out


def _partial(be, state, a, h, cav):
    if h <= 0:
        return state, a
    s, a2, _, _, _, flag = be.coupled(state, a, 1, h, cav, -np.inf)
    if flag == 2:
        raise IntegrationError("non-finite state in partial step")
    return s, a2


def _locate_partial(be, state, a, h, cav, bx, g, level):
    def f(tau):
        _, a2 = _partial(be, state, a, tau, cav)
        return bx - 2 * g * a2.real - level

    return brentq(f, 0.0, h, xtol=1e-15 * max(h, 1.0), rtol=1e-14)


def _locate(be, state, a, dt, cav, bx, g, level):
    """Fraction of the step at which b reaches ``level``."""
    return _locate_partial(be, state, a, dt, cav, bx, g, level) / dt


def _stable_fields(model, cav):
    try:
        return [p.b_eff for p in stationary_points(model, cav) if p.stability is Stability.STABLE]
    except Exception:  # noqa: BLE001 - settle gating only, never fatal
        return []


def _settled(checks_b, checks_x, n_window, window, schedule, model, switched, stable_b):
    if len(checks_b) < 2 * n_window:
        return False
    bx = model.b_x
    b_new = np.mean(checks_b[-n_window:])
    b_old = np.mean(checks_b[-2 * n_window:-n_window])
    if abs(b_new - b_old) > schedule.settle_rate * bx * window:
        return False
    x_scale = max(model.x_max, 1.0)
    x_new = np.mean(checks_x[-n_window:])
    x_old = np.mean(checks_x[-2 * n_window:-n_window])
    if abs(x_new - x_old) > schedule.settle_rate * x_scale * window:
        return False
    if switched or schedule.final is None:
        return True
    # before the switch a slow passage near a vanished branch must not count as settled
    b = b_new
    return any(abs(b - bs) <= 0.05 * bx for bs in stable_b)


def evolve_driven(model, state0, drive_t, drive_b, dt: float) -> np.ndarray:
    """Schrodinger evolution under a prescribed piecewise-linear field b(t).

    The time grid is stretched slightly so that it ends exactly at drive_t[-1].
    """
    be = _backend(model)
    tt = np.ascontiguousarray(drive_t, dtype=float)
    bb = np.ascontiguousarray(drive_b, dtype=float)
    span = tt[-1] - tt[0]
    n = max(1, int(np.ceil(span / dt - 1e-9)))
    return be.driven(be.prepare(state0), tt[0], n, span / n, tt, bb)


def extract_ramp_rate(trajectory: Trajectory, b_gap: float) -> float:
    """|db/dt| at the first downward crossing of ``b_gap`` from the sampled series.

    Uses the centred five-point stencil at the samples bracketing the crossing
    (lower order near the ends) and interpolates linearly to the crossing time.
    """
    b = np.asarray(trajectory.b_eff)
    t = np.asarray(trajectory.t)
    if b.size < 2:
        return 0.0
    below = np.flatnonzero((b[1:] < b_gap) & (b[:-1] >= b_gap))
    if below.size == 0:
        return 0.0
    i = int(below[0]) + 1
    d_prev = _stencil(t, b, i - 1)
    d_here = _stencil(t, b, i)
    frac = (b[i - 1] - b_gap) / (b[i - 1] - b[i])
    return float(abs(d_prev + frac * (d_here - d_prev)))


def _stencil(t, b, i):
    n = len(b)
    if 2 <= i <= n - 3:
        h = t[i + 1] - t[i]
        return (b[i - 2] - 8 * b[i - 1] + 8 * b[i + 1] - b[i + 2]) / (12 * h)
    if 1 <= i <= n - 2:
        return (b[i + 1] - b[i - 1]) / (t[i + 1] - t[i - 1])
    if i == 0:
        return (b[1] - b[0]) / (t[1] - t[0])
    return (b[-1] - b[-2]) / (t[-1] - t[-2])


# --------------------------------------------------------------------------
# protocol
# --------------------------------------------------------------------------


@dataclass(eq=False)
class ProtocolResult:
    control: Control
    mid: float
    trajectory: Trajectory
    lambda_c: float
    n_c: float
    lz_prediction: float
    lambda_l: float
    n_l: float
    b_final: float
    t_s: float
    b_gap: float
    gap_min: float
    terminated: str
    extras: dict = field(default_factory=dict)

    @property
    def crossed(self) -> bool:
        return self.lambda_c > 0

    def summary(self) -> dict:
        key = "eps_mid" if self.control is Control.EPSILON else "delta_mid"
        return {
            key: self.mid,
            "lambda_c": self.lambda_c,
            "n_c": self.n_c,
            "lz_prediction": self.lz_prediction,
            "lambda_l": self.lambda_l,
            "n_l": self.n_l,
            "b_final": self.b_final,
            "t_s": self.t_s,
            "terminated": self.terminated,
        }


def settle_time(trajectory: Trajectory, b_final: float, tol: float) -> float:
    """First time b comes within ``tol`` of ``b_final`` (linear interpolation)."""
    b = trajectory.b_eff
    t = trajectory.t
    inside = np.abs(b - b_final) <= tol
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return float(t[-1])
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    edge = b_final + tol if b[i - 1] > b_final else b_final - tol
    frac = (b[i - 1] - edge) / (b[i - 1] - b[i])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def initial_conditions(model, cavity: CavityParams, schedule: Schedule):
    """Starting state: ground state on the upper stationary branch of ``initial``."""
    cav0 = cavity.with_control(schedule.control, schedule.initial)
    if schedule.control is Control.EPSILON and np.isclose(
        schedule.initial, cavity.g * model.x_ss(model.b_x), rtol=1e-12, atol=0
    ):
        b0 = model.b_x
    else:
        pts = [p for p in stationary_points(model, cav0) if p.stability is Stability.STABLE]
        b0 = max(p.b_eff for p in pts)
    a0 = stationary_amplitude(float(model.x_ss(b0)), cav0)
    return model.ground_state(b0), a0, b0


def fill_schedule(model, cavity: CavityParams, schedule: Schedule, b_gap: float) -> Schedule:
    g = cavity.g
    changes = {}
    if schedule.control is Control.EPSILON:
        a = cavity.alpha
        if schedule.initial is None:
            changes["initial"] = g * model.x_ss(model.b_x)
        if schedule.final is None:
            changes["final"] = a * model.b_x / g + g * model.x_ss(0.0)
    else:
        eps = cavity.epsilon
        if schedule.initial is None:
            b_start = 0.99 * model.b_x
            a_req = g * (eps - g * model.x_ss(b_start)) / (model.b_x - b_start)
            changes["initial"] = detuning_for_alpha(a_req, cavity.kappa)
        if schedule.final is None:
            a_req = g * (eps - g * model.x_ss(0.0)) / model.b_x
            changes["final"] = detuning_for_alpha(a_req, cavity.kappa)
    if schedule.switch_threshold is None:
        changes["switch_threshold"] = 0.8 * b_gap
    return replace(schedule, **changes) if changes else schedule


def run_protocol(model, cavity: CavityParams, schedule: Schedule, gap=None,
                 track_excitation: bool = True) -> ProtocolResult:
    """Switching protocol plus linear-ramp baseline.

    ``gap`` may pass a precomputed ``GapLocation`` to avoid rescanning.
    """
    gl = gap if gap is not None else gap_location(model)
    schedule = fill_schedule(model, cavity, schedule, gl.b_gap)
    state0, a0, b0 = initial_conditions(model, cavity, schedule)
    traj = integrate_coupled(model, state0, a0, schedule, cavity, b_gap=gl.b_gap,
                             track_excitation=track_excitation)
    b_final = traj.b_mean
    n_c = excitation_probability(model, traj.final_state, b_final)
    lam_c = traj.cross_rate if traj.t_cross is not None else 0.0
    t_s = settle_time(traj, b_final, schedule.settle_tol * model.b_x)
    dt = traj.dt
    if t_s > 0:
        lam_l, n_l = run_linear_baseline(model, b0, b_final, t_s, dt)
    else:
        lam_l, n_l = 0.0, 0.0
    extras = {"t_switch": traj.t_switch, "t_cross": traj.t_cross, "max_norm_error": traj.max_norm_error,
              "b_start": b0, "initial": schedule.initial, "final": schedule.final,
              "switch_threshold": schedule.switch_threshold,
              "sampled_lambda_c": extract_ramp_rate(traj, gl.b_gap)}
    if isinstance(model, BdGModel):
        extras["infidelity"] = ground_infidelity(model, traj.final_state, b_final)
        extras["lz_modes_sum"] = float(np.sum(tfim_lz_modes(model, lam_c)))
    return ProtocolResult(
        control=schedule.control, mid=schedule.mid, trajectory=traj, lambda_c=lam_c, n_c=n_c,
        lz_prediction=lz_probability(gl.gap_min, lam_c), lambda_l=lam_l, n_l=n_l, b_final=b_final,
        t_s=t_s, b_gap=gl.b_gap, gap_min=gl.gap_min, terminated=traj.terminated, extras=extras,
    )


def run_protocol_detuning(model, cavity: CavityParams, schedule: Schedule, **kwargs) -> ProtocolResult:
    """Same protocol with the detuning as the switched control; drive fixed at cavity.epsilon."""
    if schedule.control is not Control.DELTA_C:
        schedule = replace(schedule, control=Control.DELTA_C)
    return run_protocol(model, cavity, schedule, **kwargs)


def run_linear_baseline(model, b_start: float, b_end: float, t_s: float, dt: float) -> tuple[float, float]:
    """Cavity-free linear ramp b_start -> b_end over t_s; returns (rate, excitation)."""
    if not t_s > 0:
        raise InvalidInput("t_s must be positive")
    state0 = model.ground_state(b_start)
    state = evolve_driven(model, state0, [0.0, t_s], [b_start, b_end], dt)
    return abs(b_end - b_start) / t_s, excitation_probability(model, state, b_end)

