"""Bloch-vector propagation of an ensemble through a pulse sequence.

Per-center state is the transverse phasor coh = u + i*v plus the inversion
w.  Free evolution over dt multiplies coh by exp(i*2*pi*(detuning +
parity*shift)*dt), where shift is the Stark contribution k*E while a
modulation pulse is active; modulation pulses therefore commute with free
precession and are folded into the same diagonal factor (no time stepping,
exact for square pulses).  Relaxation acts on free/Stark/wait segments:
transverse decay exp(-dt/t2), inversion pulled toward -1 with t1.

Rotations: an ideal pulse of the given area rotates every center about the
equatorial axis at angle `phase` (rotation about x by theta maps (u, v, w)
to (u, v cos - w sin, v sin + w cos)).  A finite pulse rotates about the
per-center tilted axis (rabi*cos(phase), rabi*sin(phase), detuning)/omega_eff
by 2*pi*omega_eff*duration with omega_eff = sqrt(rabi^2 + detuning^2); the
detuning precession during the pulse is exact, relaxation during the pulse
is neglected (pulses are much shorter than t2 in every regime of interest).

The runner makes two passes.  Pass 1 walks event boundaries, applying
rotations and recording state snapshots.  Pass 2 replays each acquisition
window from the nearest snapshot with purely diagonal evolution, stepping
sample to sample with one cached multiplier per uniform span, and reduces
the polarization P(t) = sum weight * coh with a fixed-order dot product so
results are bit-reproducible for a given ensemble ordering.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ensemble import BlochVector, Center, Ensemble, RelaxationSpec
from .errors import ValidationError
from .sequence import Acquire, RfPulse, Sequence, StarkPulse


@dataclass
class SignalTrace:
    """Complex ensemble polarization sampled on a uniform grid."""

    label: str
    times: np.ndarray
    values: np.ndarray
    parity_pos: Optional[np.ndarray] = None
    parity_neg: Optional[np.ndarray] = None

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def sample_rate(self) -> float:
        if len(self.times) < 2:
            return math.nan
        return 1.0 / (self.times[1] - self.times[0])


@dataclass
class RunResult:
    """Traces keyed by acquire label plus the post-run ensemble state."""

    traces: Dict[str, SignalTrace]
    final: Ensemble

    def __getitem__(self, label: str) -> SignalTrace:
        return self.traces[label]


# ---------------------------------------------------------------------------
# elementary maps (array core + per-center wrappers)


def _advance_arrays(coh, w, detuning_shifted, dt, relax: RelaxationSpec):
    """Diagonal evolution: phase winding plus relaxation over dt >= 0."""
    phase = np.exp(2j * np.pi * detuning_shifted * dt)
    if math.isfinite(relax.t2):
        coh = coh * phase * math.exp(-dt / relax.t2)
    else:
        coh = coh * phase
    if math.isfinite(relax.t1):
        w = -1.0 + (w + 1.0) * math.exp(-dt / relax.t1)
    return coh, w


def _rotate_ideal_arrays(coh, w, area, phase):
    half = 0.5 * area
    c2, s2 = math.cos(half) ** 2, math.sin(half) ** 2
    s = math.sin(area)
    axis = complex(math.cos(phase), math.sin(phase))
    coh_new = coh * c2 + np.conj(coh) * (axis * axis) * s2 - 1j * axis * (w * s)
    w_new = w * math.cos(area) + s * np.imag(coh * np.conj(axis))
    return coh_new, w_new


def _rotate_tilted_arrays(coh, w, detuning, rabi, phase, duration):
    """Rodrigues rotation about the per-center axis (rabi, 0, detuning) frame."""
    omega_eff = np.sqrt(rabi * rabi + detuning * detuning)
    theta = 2.0 * np.pi * omega_eff * duration
    with np.errstate(invalid="ignore", divide="ignore"):
        nx = np.where(omega_eff > 0, rabi * math.cos(phase) / omega_eff, 0.0)
        ny = np.where(omega_eff > 0, rabi * math.sin(phase) / omega_eff, 0.0)
        nz = np.where(omega_eff > 0, detuning / omega_eff, 0.0)
    u, v = coh.real, coh.imag
    ct, st = np.cos(theta), np.sin(theta)
    ndot = nx * u + ny * v + nz * w
    cx = ny * w - nz * v
    cy = nz * u - nx * w
    cz = nx * v - ny * u
    one_m = 1.0 - ct
    u_new = u * ct + cx * st + nx * ndot * one_m
    v_new = v * ct + cy * st + ny * ndot * one_m
    w_new = w * ct + cz * st + nz * ndot * one_m
    return u_new + 1j * v_new, w_new


def free_evolve(c: Center, dt: float, extra_shift: float = 0.0,
                relaxation: Optional[RelaxationSpec] = None) -> Center:
    """Free precession of one center for dt seconds.

    extra_shift (Hz) is the Stark shift magnitude k*E; the center's parity
    selects its sign.  Relaxation defaults to none.
    """
    if dt < 0:
        raise ValidationError("dt must be >= 0")
    relax = relaxation or RelaxationSpec()
    coh = np.array([complex(c.state.u, c.state.v)])
    w = np.array([c.state.w])
    shifted = np.array([c.detuning + c.parity * extra_shift])
    coh, w = _advance_arrays(coh, w, shifted, dt, relax)
    return Center(c.detuning, c.stark_coeff, c.parity,
                  BlochVector(float(coh[0].real), float(coh[0].imag), float(w[0])),
                  c.weight)


def rotate(c: Center, area: float, phase: float = 0.0, rabi: Optional[float] = None,
           detuning_aware: bool = True) -> Center:
    """Rotate one center; rabi=None gives the ideal instantaneous rotation."""
    coh = np.array([complex(c.state.u, c.state.v)])
    w = np.array([c.state.w])
    if rabi is None or not detuning_aware:
        coh, w = _rotate_ideal_arrays(coh, w, area, phase)
    else:
        duration = area / (2.0 * math.pi * rabi)
        coh, w = _rotate_tilted_arrays(coh, w, np.array([c.detuning]), rabi, phase, duration)
    return Center(c.detuning, c.stark_coeff, c.parity,
                  BlochVector(float(coh[0].real), float(coh[0].imag), float(w[0])),
                  c.weight)


# ---------------------------------------------------------------------------
# sequence runner

_PRIO_STARK_OFF, _PRIO_STARK_ON, _PRIO_RF = 0, 1, 2


@dataclass
class _Snapshot:
    time: float
    field: float            # active Stark field (sign*amplitude), V/cm
    coh: np.ndarray
    w: np.ndarray


class _Engine:
    def __init__(self, ens: Ensemble):
        self.ens = ens
        self.relax = ens.relaxation
        self.coh = ens.coh
        self.w = ens.w
        self._step_key = None
        self._step = None

    def shifted_detuning(self, field: float) -> np.ndarray:
        if field == 0.0:
            return self.ens.detuning
        return self.ens.detuning + self.ens.parity * self.ens.stark * field

    def advance(self, dt: float, field: float) -> None:
        if dt <= 0:
            return
        self.coh, self.w = _advance_arrays(
            self.coh, self.w, self.shifted_detuning(field), dt, self.relax)

    def rotate(self, ev: RfPulse) -> None:
        if ev.ideal:
            self.coh, self.w = _rotate_ideal_arrays(self.coh, self.w, ev.area, ev.phase)
        else:
            self.coh, self.w = _rotate_tilted_arrays(
                self.coh, self.w, self.ens.detuning, ev.rabi, ev.phase, ev.duration)


def run_sequence(ensemble: Ensemble, seq: Sequence, *, keep_parity: bool = False,
                 detection_noise: float = 0.0, noise_seed: int = 0) -> RunResult:
    """Propagate the ensemble through seq, returning one trace per acquire.

    The input ensemble is not mutated; propagation starts from its current
    state (freshly built ensembles are in the ground state).  The returned
    final ensemble has been advanced to the end of the sequence.
    """
    ens = ensemble.copy()
    engine = _Engine(ens)

    transitions: List[Tuple[float, int, object]] = []
    for order, ev in enumerate(seq.events):
        if isinstance(ev, RfPulse):
            transitions.append((ev.start, _PRIO_RF, order))
        elif isinstance(ev, StarkPulse) and ev.duration > 0:
            # zero-length modulation pulses impart no phase and are skipped
            eff = ev.sign * ev.amplitude
            transitions.append((ev.start, _PRIO_STARK_ON, eff))
            transitions.append((ev.end, _PRIO_STARK_OFF, 0.0))
    transitions.sort(key=lambda t: (t[0], t[1]))

    # pass 1: events only, snapshot after every boundary instant
    snapshots: List[_Snapshot] = [
        _Snapshot(-math.inf, 0.0, engine.coh.copy(), engine.w.copy())
    ]
    field_changes: List[Tuple[float, float]] = []   # (time, field value after)
    t_cur = None
    fld = 0.0
    for time, prio, payload in transitions:
        if t_cur is not None:
            engine.advance(time - t_cur, fld)
        t_cur = time
        if prio == _PRIO_RF:
            ev = seq.events[payload]
            engine.rotate(ev)
            t_cur = ev.end
        else:
            fld = float(payload)
            field_changes.append((t_cur, fld))
        snapshots.append(_Snapshot(t_cur, fld, engine.coh.copy(), engine.w.copy()))

    end_time = seq.end
    if t_cur is not None and end_time > t_cur:
        engine.advance(end_time - t_cur, fld)
    ens.coh, ens.w = engine.coh, engine.w

    snap_times = [s.time for s in snapshots]
    weight = ens.weight
    wpos = np.where(ens.parity > 0, weight, 0.0)
    wneg = np.where(ens.parity < 0, weight, 0.0)

    traces: Dict[str, SignalTrace] = {}
    for ev in seq.events:
        if not isinstance(ev, Acquire):
            continue
        traces[ev.label] = _replay_window(
            ev, seq.sample_rate, snapshots, snap_times, field_changes,
            ens, weight, wpos, wneg, keep_parity)

    if detection_noise > 0.0:
        rng = np.random.default_rng(noise_seed)
        scale = detection_noise / math.sqrt(2.0)
        for ev in seq.events:
            if isinstance(ev, Acquire):
                tr = traces[ev.label]
                tr.values = tr.values + scale * (
                    rng.standard_normal(len(tr.values))
                    + 1j * rng.standard_normal(len(tr.values))
                )

    return RunResult(traces=traces, final=ens)


def _replay_window(acq: Acquire, sample_rate: float, snapshots, snap_times,
                   field_changes, ens: Ensemble, weight, wpos, wneg,
                   keep_parity: bool) -> SignalTrace:
    dt = 1.0 / sample_rate
    n_samples = int(math.floor(acq.duration * sample_rate + 1e-9)) + 1
    times = acq.start + np.arange(n_samples) * dt

    idx = bisect.bisect_right(snap_times, acq.start) - 1
    snap = snapshots[idx]
    coh = snap.coh.copy()
    fld = snap.field
    t_cur = acq.start if math.isinf(snap.time) else snap.time
    relax = ens.relaxation

    pending = [(t, f) for t, f in field_changes if t_cur < t <= times[-1]]
    pending_i = 0

    values = np.empty(n_samples, dtype=complex)
    ppos = np.empty(n_samples, dtype=complex) if keep_parity else None
    pneg = np.empty(n_samples, dtype=complex) if keep_parity else None

    step = None
    decay2 = math.exp(-dt / relax.t2) if math.isfinite(relax.t2) else 1.0

    for k in range(n_samples):
        target = times[k]
        moved = False
        while pending_i < len(pending) and pending[pending_i][0] <= target:
            t_sw, f_new = pending[pending_i]
            if t_sw > t_cur:
                coh = coh * np.exp(2j * np.pi * _shifted(ens, fld) * (t_sw - t_cur))
                if math.isfinite(relax.t2):
                    coh *= math.exp(-(t_sw - t_cur) / relax.t2)
                t_cur = t_sw
            fld = f_new
            step = None
            pending_i += 1
            moved = True
        gap = target - t_cur
        if moved or k == 0 or abs(gap - dt) > 1e-12 * max(abs(target), 1.0):
            if gap > 0:
                coh = coh * np.exp(2j * np.pi * _shifted(ens, fld) * gap)
                if math.isfinite(relax.t2):
                    coh *= math.exp(-gap / relax.t2)
            step = None
        else:
            if step is None:
                step = np.exp(2j * np.pi * _shifted(ens, fld) * dt) * decay2
            coh = coh * step
        t_cur = target
        values[k] = np.dot(weight, coh)
        if keep_parity:
            ppos[k] = np.dot(wpos, coh)
            pneg[k] = np.dot(wneg, coh)

    return SignalTrace(label=acq.label, times=times, values=values,
                       parity_pos=ppos, parity_neg=pneg)


def _shifted(ens: Ensemble, field: float) -> np.ndarray:
    if field == 0.0:
        return ens.detuning
    return ens.detuning + ens.parity * ens.stark * field
