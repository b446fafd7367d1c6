"""Qubit state tomography of the memory output.

Input states +-X, +-Y are prepared by the phase of the excitation pulse
(+Z is no pulse at all).  The transverse components of the output density
matrix come from the complex output-echo amplitude, calibrated against the
+X reference run; the inversion component comes either from the simulator
state directly or from an appended readout echo, mirroring how an
experiment would measure it.  Fidelities compare the modulated run against
the unmodulated reference, which is also how the output is normalized, so
only modulation-induced distortion counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .dynamics import RunResult, SignalTrace, run_sequence
from .ensemble import Ensemble
from .errors import ValidationError
from .sequence import Acquire, RfParams, Sequence, make_semm, semm_times

STATES = ("+X", "-X", "+Y", "-Y", "+Z")

# Equatorial angle of each target state; the preparation pulse phase is
# target - pi/2 because a pi/2 rotation about the axis at angle phi carries
# the ground state to the equator at angle phi + pi/2.
_TARGET_ANGLE = {"+X": 0.0, "-X": math.pi, "+Y": 0.5 * math.pi, "-Y": 1.5 * math.pi}


class DensityMatrix2:
    """2x2 qubit density matrix with physicality checks."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValidationError("density matrix must be 2x2")
        if not np.allclose(m, m.conj().T, atol=1e-12):
            raise ValidationError("density matrix must be Hermitian within 1e-12")
        if abs(np.trace(m) - 1.0) > 1e-12:
            raise ValidationError("density matrix trace must be 1 within 1e-12")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise ValidationError("density matrix has a negative eigenvalue")
        self.matrix = m

    @classmethod
    def from_bloch(cls, sx: float, sy: float, sz: float) -> "DensityMatrix2":
        """rho = (I + s . sigma)/2; vectors outside the ball are radially projected."""
        norm = math.sqrt(sx * sx + sy * sy + sz * sz)
        if norm > 1.0:
            sx, sy, sz = sx / norm, sy / norm, sz / norm
        return cls([
            [0.5 * (1.0 + sz), 0.5 * (sx - 1j * sy)],
            [0.5 * (sx + 1j * sy), 0.5 * (1.0 - sz)],
        ])

    def bloch(self) -> Tuple[float, float, float]:
        m = self.matrix
        return (float(2.0 * m[1, 0].real), float(2.0 * m[1, 0].imag),
                float((m[0, 0] - m[1, 1]).real))

    def as_json(self) -> Dict[str, list]:
        return {"re": self.matrix.real.tolist(), "im": self.matrix.imag.tolist()}

    def __repr__(self):
        sx, sy, sz = self.bloch()
        return f"DensityMatrix2(bloch=({sx:.6g}, {sy:.6g}, {sz:.6g}))"


def fidelity(rho: DensityMatrix2, sigma: DensityMatrix2) -> float:
    """Qubit closed form F = Tr(rho sigma) + 2 sqrt(det rho det sigma)."""
    a, b = rho.matrix, sigma.matrix
    overlap = float(np.trace(a @ b).real)
    det_term = float(np.linalg.det(a).real) * float(np.linalg.det(b).real)
    return overlap + 2.0 * math.sqrt(max(det_term, 0.0))


def prepare_input(state: str, rabi: Optional[float] = None) -> RfParams:
    """Excitation pulse landing the Bloch vector on the labeled state.

    +-X and +-Y are pi/2 pulses whose phase is fixed by the rotation
    convention so the prepared vector points along the labeled equatorial
    axis; +Z is a zero-area pulse (no excitation).
    """
    if state == "+Z":
        return RfParams(area=0.0, phase=0.0, rabi=None)
    if state not in _TARGET_ANGLE:
        raise ValidationError(f"unknown input state {state!r}; use one of {STATES}")
    phase = (_TARGET_ANGLE[state] - 0.5 * math.pi) % (2.0 * math.pi)
    return RfParams(area=0.5 * math.pi, phase=phase, rabi=rabi)


def reconstruct(output_amplitude: complex, z_readout: float, *,
                reference_amplitude: complex) -> DensityMatrix2:
    """Linear inversion: transverse components from the calibrated complex
    amplitude, inversion from the z readout."""
    if reference_amplitude == 0:
        raise ValidationError("reference amplitude is zero; cannot calibrate")
    phasor = output_amplitude / reference_amplitude
    return DensityMatrix2.from_bloch(float(phasor.real), float(phasor.imag),
                                     float(z_readout))


@dataclass(frozen=True)
class StateResult:
    state: str
    rho_on: DensityMatrix2
    rho_off: DensityMatrix2
    fidelity: float
    amplitude_on: complex
    amplitude_off: complex
    z_on: float
    z_off: float


@dataclass(frozen=True)
class TomographyResult:
    states: Tuple[StateResult, ...]
    average_fidelity: float


def _amplitude_at(trace: SignalTrace, t: float) -> complex:
    idx = int(np.argmin(np.abs(trace.times - t)))
    return complex(trace.values[idx])


def _z_sequence(seq: Sequence, pi_pulse: RfParams, delay: float,
                tau: float) -> Tuple[Sequence, float]:
    """Append a two-pulse readout echo after the output window."""
    read_half = RfParams(area=0.5 * math.pi, phase=0.0, rabi=pi_pulse.rabi)
    t_read = seq.end + delay
    t_pi = t_read + tau
    t_echo = t_pi + tau
    dt = 1.0 / seq.sample_rate
    n_half = max(2, int(0.25 * tau * seq.sample_rate))
    window = Acquire(start=t_echo - n_half * dt, duration=2 * n_half * dt, label="zread")
    events = tuple(seq.events) + (read_half.at(t_read), pi_pulse.at(t_pi), window)
    return Sequence(events=events, sample_rate=seq.sample_rate), t_echo


def run_tomography(
    ensemble: Ensemble,
    semm_kwargs: Dict,
    *,
    z_mode: str = "direct",
    z_delay: float = 2.3e-3,
    z_tau: float = 1.7e-3,
) -> TomographyResult:
    """Reconstruct the five memory outputs with and without modulation.

    semm_kwargs are the make_semm arguments minus input_pulse, which is
    stamped per state; pass input_rabi inside semm_kwargs["input_pulse"]
    to make the excitation pulses finite.  z_mode "direct" reads the
    ensemble inversion from the simulator; "sequence" measures it with an
    appended readout echo calibrated against a fresh ground ensemble.
    """
    if z_mode not in ("direct", "sequence"):
        raise ValidationError("z_mode must be 'direct' or 'sequence'")
    kwargs = dict(semm_kwargs)
    base_input: Optional[RfParams] = kwargs.pop("input_pulse", None)
    input_rabi = base_input.rabi if base_input is not None else None
    pi_pulse: RfParams = kwargs.get("pi_pulse") or RfParams(area=math.pi)
    amplitude = kwargs.pop("stark_amplitude")

    runs: Dict[Tuple[str, bool], Tuple[complex, float]] = {}
    for state in STATES:
        for on in (True, False):
            seq = make_semm(
                stark_amplitude=amplitude if on else 0.0,
                input_pulse=prepare_input(state, input_rabi),
                **kwargs,
            )
            t7 = semm_times(kwargs["t1"], kwargs["t2"], kwargs["t3"],
                            kwargs.get("t5_offset")).t7
            if z_mode == "sequence":
                seq, t_echo = _z_sequence(seq, pi_pulse, z_delay, z_tau)
            result = run_sequence(ensemble, seq)
            amp = _amplitude_at(result["echo2"], t7)
            if z_mode == "direct":
                z = result.final.mean_w()
            else:
                z = _z_from_readout(ensemble, result, t_echo, seq, pi_pulse, z_tau)
            runs[(state, on)] = (amp, z)

    ref_amp = runs[("+X", False)][0]
    if ref_amp == 0:
        raise ValidationError("+X reference output vanished; cannot calibrate tomography")

    states: List[StateResult] = []
    for state in STATES:
        amp_on, z_on = runs[(state, True)]
        amp_off, z_off = runs[(state, False)]
        rho_on = reconstruct(amp_on, z_on, reference_amplitude=ref_amp)
        rho_off = reconstruct(amp_off, z_off, reference_amplitude=ref_amp)
        states.append(StateResult(
            state=state, rho_on=rho_on, rho_off=rho_off,
            fidelity=fidelity(rho_on, rho_off),
            amplitude_on=amp_on, amplitude_off=amp_off,
            z_on=z_on, z_off=z_off,
        ))
    avg = float(np.mean([s.fidelity for s in states]))
    return TomographyResult(states=tuple(states), average_fidelity=avg)


def _z_from_readout(ensemble: Ensemble, result: RunResult, t_echo: float,
                    seq: Sequence, pi_pulse: RfParams, tau: float) -> float:
    """Calibrate the readout echo against a fresh ground ensemble (w = -1)."""
    amp = _amplitude_at(result["zread"], t_echo)
    # replay just the readout tail on a pristine ensemble to get the w = -1
    # reference amplitude
    t_read = t_echo - 2.0 * tau
    read_half = RfParams(area=0.5 * math.pi, phase=0.0, rabi=pi_pulse.rabi)
    dt = 1.0 / seq.sample_rate
    n_half = max(2, int(0.25 * tau * seq.sample_rate))
    window = Acquire(start=t_echo - n_half * dt, duration=2 * n_half * dt, label="zread")
    cal_seq = Sequence(events=(read_half.at(t_read), pi_pulse.at(t_read + tau), window),
                       sample_rate=seq.sample_rate)
    fresh = ensemble.copy()
    fresh.reset()
    cal = run_sequence(fresh, cal_seq)
    amp_cal = _amplitude_at(cal["zread"], t_echo)
    if amp_cal == 0:
        raise ValidationError("readout calibration echo vanished")
    return float(-(amp / amp_cal).real)
