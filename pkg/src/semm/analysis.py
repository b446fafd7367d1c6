"""Echo detection, modulation sweeps, suppression ratios, and the
cancellation-condition root solver.

Echo amplitudes are always reported relative to a zero-field reference run
rather than in absolute units; the ideal-pulse quadrature limit of the
normalized echo-1 intensity is ft_real(g, E*Ts)^2, the squared cosine
transform of the Stark-coefficient distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence as Seq, Tuple

import numpy as np

from .distributions import Distribution
from .dynamics import SignalTrace, run_sequence
from .ensemble import Ensemble
from .errors import NoRootFoundError, ValidationError
from .sequence import Acquire, RfPulse, Sequence, StarkPulse


@dataclass(frozen=True)
class EchoRecord:
    """Peak observables of one echo within a search window."""

    label: str
    peak_time: float
    amplitude: complex
    integrated_intensity: float   # integral of |P|^2 dt over the window
    fwhm: Optional[float] = None  # envelope (|P|) full width at half max, if resolvable

    @property
    def intensity(self) -> float:
        return abs(self.amplitude) ** 2


@dataclass(frozen=True)
class SuppressionResult:
    """Field-on / field-off peak intensity ratio.

    With shots > 1 the ratio uses shot-averaged intensities; the echo
    records describe the first shot.
    """

    mu: float
    echo_on: EchoRecord
    echo_off: EchoRecord
    mean_intensity_on: float
    mean_intensity_off: float
    shots: int = 1


@dataclass(frozen=True)
class SweepPoint:
    ts: float
    normalized_intensity: float
    oracle: Optional[float] = None


def detect_echo(trace: SignalTrace, expected_time: float, window: float) -> EchoRecord:
    """Locate the |P| peak inside [expected_time - window/2, expected_time + window/2]."""
    if window <= 0:
        raise ValidationError("search window must be > 0")
    lo, hi = expected_time - 0.5 * window, expected_time + 0.5 * window
    mask = (trace.times >= lo) & (trace.times <= hi)
    if not np.any(mask):
        raise ValidationError(
            f"window [{lo!r}, {hi!r}] contains no samples of trace {trace.label!r}"
        )
    times = trace.times[mask]
    values = trace.values[mask]
    mags = np.abs(values)
    peak = int(np.argmax(mags))
    inten = mags**2
    dt = times[1] - times[0] if len(times) > 1 else 0.0
    integrated = float(np.trapezoid(inten, dx=dt)) if len(times) > 1 else 0.0
    return EchoRecord(
        label=trace.label,
        peak_time=float(times[peak]),
        amplitude=complex(values[peak]),
        integrated_intensity=integrated,
        fwhm=_fwhm(times, mags, peak),
    )


def _fwhm(times: np.ndarray, envelope: np.ndarray, peak: int) -> Optional[float]:
    """Envelope full width at half maximum by linear interpolation of crossings."""
    top = envelope[peak]
    if top <= 0 or len(times) < 3:
        return None
    half = 0.5 * top

    def cross(idx_range) -> Optional[float]:
        prev = peak
        for i in idx_range:
            if envelope[i] <= half:
                frac = (envelope[prev] - half) / (envelope[prev] - envelope[i])
                return float(times[prev] + frac * (times[i] - times[prev]))
            prev = i
        return None

    left = cross(range(peak - 1, -1, -1))
    right = cross(range(peak + 1, len(times)))
    if left is None or right is None:
        return None
    return right - left


def _stark_events(seq: Sequence) -> List[StarkPulse]:
    return [ev for ev in seq.events if isinstance(ev, StarkPulse)]


def _with_stark(seq: Sequence, amplitude: float, ts: Optional[float] = None) -> Sequence:
    """Copy of seq with every modulation pulse's amplitude (and optionally length) replaced."""
    events = []
    for ev in seq.events:
        if isinstance(ev, StarkPulse):
            ev = replace(ev, amplitude=amplitude,
                         duration=ev.duration if ts is None else ts)
        events.append(ev)
    return Sequence(events=tuple(events), sample_rate=seq.sample_rate)


def _window_center(seq: Sequence, label: str) -> Tuple[float, float]:
    acq = seq.find_acquire(label)
    return acq.start + 0.5 * acq.duration, acq.duration


def sweep_modulation(
    ensemble: Ensemble,
    base_seq: Sequence,
    stark_amplitude: float,
    ts_values: Seq[float],
    *,
    echo_label: str = "echo1",
    oracle: Optional[Distribution] = None,
) -> List[SweepPoint]:
    """Normalized echo intensity versus modulation pulse length.

    Each point reruns base_seq with its Stark pulses set to
    (stark_amplitude, Ts) and divides the detected echo intensity by the
    zero-field reference.  With oracle given, each point also carries
    ft_real(oracle, E*Ts)^2, the ideal-pulse closed form.
    """
    center, width = _window_center(base_seq, echo_label)
    ref_seq = _with_stark(base_seq, 0.0)
    ref = detect_echo(run_sequence(ensemble, ref_seq)[echo_label], center, width)
    if ref.intensity < 1e-30:   # numerically zero
        raise ValidationError("zero-field reference echo vanishes; cannot normalize")
    points = []
    for ts in ts_values:
        seq = _with_stark(base_seq, stark_amplitude, ts=float(ts))
        rec = detect_echo(run_sequence(ensemble, seq)[echo_label], center, width)
        oracle_val = None
        if oracle is not None:
            oracle_val = float(oracle.ft_real(stark_amplitude * float(ts))) ** 2
        points.append(SweepPoint(ts=float(ts),
                                 normalized_intensity=rec.intensity / ref.intensity,
                                 oracle=oracle_val))
    return points


def jittered_sequence(seq: Sequence, jitter: Dict[str, float],
                      rng: np.random.Generator) -> Sequence:
    """Scale pulse parameters by 1 + sigma*g per shot; one draw per parameter.

    Supported keys: stark_amplitude, stark_duration, rf_area.
    """
    factors = {name: 1.0 + sigma * rng.standard_normal() for name, sigma in jitter.items()}
    events = []
    for ev in seq.events:
        if isinstance(ev, StarkPulse):
            ev = replace(
                ev,
                amplitude=ev.amplitude * factors.get("stark_amplitude", 1.0),
                duration=ev.duration * factors.get("stark_duration", 1.0),
            )
        elif isinstance(ev, RfPulse) and "rf_area" in factors:
            scale = factors["rf_area"]
            dur = ev.duration * scale if not ev.ideal else 0.0
            ev = replace(ev, area=ev.area * scale, duration=dur)
        events.append(ev)
    return Sequence(events=tuple(events), sample_rate=seq.sample_rate)


def suppression(
    ensemble: Ensemble,
    seq_on: Sequence,
    seq_off: Sequence,
    *,
    echo_label: str = "echo1",
    shots: int = 1,
    jitter: Optional[Dict[str, float]] = None,
    seed: int = 0,
) -> SuppressionResult:
    """Peak-intensity ratio mu = I_on / I_off at the shared echo window.

    shots > 1 with jitter reruns both sequences with per-shot parameter
    scaling (relative sigmas) and averages intensities before taking the
    ratio, mirroring shot-averaged detection.
    """
    if shots < 1:
        raise ValidationError("shots must be >= 1")
    center, width = _window_center(seq_on, echo_label)
    rng = np.random.default_rng(seed)
    on_intensities, off_intensities = [], []
    rec_on = rec_off = None
    for shot in range(shots):
        s_on, s_off = seq_on, seq_off
        if jitter:
            s_on = jittered_sequence(seq_on, jitter, rng)
            s_off = jittered_sequence(seq_off, jitter, rng)
        r_on = detect_echo(run_sequence(ensemble, s_on)[echo_label], center, width)
        r_off = detect_echo(run_sequence(ensemble, s_off)[echo_label], center, width)
        on_intensities.append(r_on.intensity)
        off_intensities.append(r_off.intensity)
        if shot == 0:
            rec_on, rec_off = r_on, r_off
    mean_on = float(np.mean(on_intensities))
    mean_off = float(np.mean(off_intensities))
    if mean_off < 1e-30:   # numerically zero
        raise ValidationError("field-off reference echo vanishes; cannot form mu")
    return SuppressionResult(
        mu=mean_on / mean_off,
        echo_on=rec_on,
        echo_off=rec_off,
        mean_intensity_on=mean_on,
        mean_intensity_off=mean_off,
        shots=shots,
    )


def solve_cancellation(d: Distribution, x_max: float, *, grid: int = 2048,
                       rtol: float = 1e-12) -> float:
    """Smallest x in (0, x_max] with ft_real(d, x) = 0.

    Scans a log-spaced grid for the first sign change, then bisects to the
    requested relative tolerance.  Raises NoRootFoundError carrying the
    grid minimum when the transform never crosses zero (e.g. when a large
    weight fraction sits at zero Stark shift).
    """
    if x_max <= 0:
        raise ValidationError("x_max must be > 0")
    xs = np.logspace(math.log10(x_max) - 6.0, math.log10(x_max), grid)
    vals = np.asarray(d.ft_real(xs))
    sign_change = np.nonzero(np.signbit(vals[1:]) != np.signbit(vals[:-1]))[0]
    exact = np.nonzero(vals == 0.0)[0]
    if exact.size and (not sign_change.size or exact[0] <= sign_change[0]):
        return float(xs[exact[0]])
    if not sign_change.size:
        # refine the grid minimum a little before reporting the obstruction
        i = int(np.argmin(np.abs(vals)))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
        fine = np.linspace(lo, hi, 257)
        fvals = np.abs(np.asarray(d.ft_real(fine)))
        j = int(np.argmin(fvals))
        if fvals[j] < abs(vals[i]):
            raise NoRootFoundError(float(np.sign(vals[i]) * fvals[j]), float(fine[j]))
        raise NoRootFoundError(float(vals[i]), float(xs[i]))
    i = int(sign_change[0])
    a, b = float(xs[i]), float(xs[i + 1])
    fa = float(d.ft_real(a))
    while (b - a) > rtol * b:
        m = 0.5 * (a + b)
        fm = float(d.ft_real(m))
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)
