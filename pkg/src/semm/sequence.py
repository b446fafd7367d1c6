"""Pulse sequence model: events, text grammar, and the canonical echo timeline.

Grammar (one event per line or semicolon-separated, key=value parameters,
numbers accept pi expressions such as pi, pi/2, 3*pi/4 and scientific
notation; '#' starts a comment):

    samplerate 1e6
    rf area=pi/2 phase=0 at=0
    stark E=165 Ts=3.52e-3 at=4.5e-3
    rf area=pi at=16e-3 rabi=20833
    acquire echo1 from=27e-3 to=37e-3
    wait at=40e-3 duration=1e-3

Rendering uses shortest round-trip float formatting (17 significant digits),
so parse(render(seq)) reproduces the sequence bit-exactly.

Conventions: rf pulses with a finite Rabi frequency occupy
[start, start+duration] with duration = area / (2*pi*rabi); ideal pulses are
instantaneous.  `make_semm` centers finite pulses on their nominal times so
echo arrival times keep the ideal-pulse identities t4 = 2*t3 - t1 and
t7 = 2*t6 - t4.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple, Union

from .errors import ConstraintError, SequenceError, ValidationError

# relative slack when area, rabi and duration are all specified; looser than
# exact because lab values are typically rounded (e.g. area=pi rabi=20833
# duration=24e-6 is accepted)
_AREA_RTOL = 1e-3


@dataclass(frozen=True)
class RfPulse:
    """Rotation pulse; rabi=None means ideal (instantaneous) rotation."""

    start: float
    area: float            # radians
    phase: float = 0.0     # radians, equatorial axis angle
    rabi: Optional[float] = None   # Hz
    duration: float = 0.0  # seconds; 0 for ideal pulses

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def ideal(self) -> bool:
        return self.rabi is None


@dataclass(frozen=True)
class StarkPulse:
    """Square phase-modulation pulse of the given field amplitude (V/cm)."""

    start: float
    duration: float        # seconds (Ts)
    amplitude: float       # V/cm; any real
    sign: float = 1.0      # +-1, global field polarity flip

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Acquire:
    start: float
    duration: float
    label: str

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Wait:
    start: float
    duration: float

    @property
    def end(self) -> float:
        return self.start + self.duration


PulseEvent = Union[RfPulse, StarkPulse, Acquire, Wait]


@dataclass(frozen=True)
class RfParams:
    """Area/phase/rabi triple used to stamp rf pulses into a timeline."""

    area: float
    phase: float = 0.0
    rabi: Optional[float] = None

    @property
    def duration(self) -> float:
        return 0.0 if self.rabi is None else self.area / (2.0 * math.pi * self.rabi)

    def at(self, t: float, center: bool = True) -> RfPulse:
        start = t - 0.5 * self.duration if center else t
        return RfPulse(start=start, area=self.area, phase=self.phase,
                       rabi=self.rabi, duration=self.duration)


@dataclass(frozen=True)
class Sequence:
    events: Tuple[PulseEvent, ...]
    sample_rate: float = 1e6   # Hz, acquisition grid

    def __post_init__(self):
        validate_events(self.events, self.sample_rate)

    def acquires(self) -> List[Acquire]:
        return [ev for ev in self.events if isinstance(ev, Acquire)]

    def find_acquire(self, label: str) -> Acquire:
        for ev in self.acquires():
            if ev.label == label:
                return ev
        raise ValidationError(f"no acquire window labeled {label!r}")

    @property
    def end(self) -> float:
        return max(ev.end for ev in self.events)


def _positive_overlap(a, b) -> bool:
    return a.start < b.end and b.start < a.end


def validate_events(events: Tuple[PulseEvent, ...], sample_rate: float) -> None:
    if sample_rate <= 0:
        raise ValidationError("sample_rate must be > 0")
    if not events:
        raise ValidationError("sequence has no events")
    starts = [ev.start for ev in events]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise SequenceError("event start times must be strictly increasing")
    for ev in events:
        if ev.duration < 0:
            raise SequenceError(f"negative duration on event at t={ev.start!r}")
        if isinstance(ev, RfPulse):
            _check_rf(ev)
        if isinstance(ev, StarkPulse) and ev.sign not in (-1.0, 1.0):
            raise SequenceError(f"stark sign must be +-1, got {ev.sign!r}")
        if isinstance(ev, Acquire) and ev.duration * sample_rate < 1 and ev.duration == 0:
            # zero-length window still yields its single start sample
            pass
    hard = [ev for ev in events if not isinstance(ev, Acquire)]
    for i, a in enumerate(hard):
        for b in hard[i + 1:]:
            if _positive_overlap(a, b):
                raise SequenceError(
                    f"events overlap: {type(a).__name__} at t={a.start!r} and "
                    f"{type(b).__name__} at t={b.start!r}"
                )
    for acq in events:
        if not isinstance(acq, Acquire):
            continue
        for ev in events:
            if not isinstance(ev, RfPulse):
                continue
            inside_ideal = ev.ideal and acq.start < ev.start < acq.end
            if _positive_overlap(acq, ev) or inside_ideal:
                raise SequenceError(
                    f"acquire {acq.label!r} would span the rf pulse at t={ev.start!r}"
                )


def _check_rf(ev: RfPulse) -> None:
    if ev.ideal:
        if ev.duration != 0.0:
            raise SequenceError(
                f"rf pulse at t={ev.start!r} has duration without a rabi frequency"
            )
        return
    if ev.rabi <= 0:
        raise SequenceError(f"rf rabi must be > 0, got {ev.rabi!r}")
    implied = 2.0 * math.pi * ev.rabi * ev.duration
    if abs(implied - ev.area) > _AREA_RTOL * max(abs(ev.area), 1e-12):
        raise SequenceError(
            f"rf pulse at t={ev.start!r}: area {ev.area!r} inconsistent with "
            f"2*pi*rabi*duration = {implied!r}"
        )


# ---------------------------------------------------------------------------
# text grammar

_PI_RE = re.compile(
    r"^([+-]?)(?:(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)\*)?pi(?:/(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?))?$"
)


def _parse_number(tok: str, line: int, col: int) -> float:
    m = _PI_RE.match(tok)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        num = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0:
            raise SequenceError("division by zero in pi expression", line, col)
        return sign * num * math.pi / den
    try:
        return float(tok)
    except ValueError:
        raise SequenceError(f"cannot parse number {tok!r}", line, col) from None


def _split_params(tokens, line, cols, allowed, required, kind):
    params: Dict[str, float] = {}
    for tok, col in zip(tokens, cols):
        if "=" not in tok:
            raise SequenceError(f"expected key=value, got {tok!r}", line, col)
        key, _, val = tok.partition("=")
        if key not in allowed:
            raise SequenceError(f"unknown parameter {key!r} for {kind}", line, col)
        if key in params:
            raise SequenceError(f"duplicate parameter {key!r}", line, col)
        params[key] = _parse_number(val, line, col + len(key) + 1)
    for key in required:
        if key not in params:
            raise SequenceError(f"{kind} requires parameter {key!r}", line, cols[0] if cols else 1)
    return params


def _tokenize(statement: str):
    tokens, cols = [], []
    for m in re.finditer(r"\S+", statement):
        tokens.append(m.group(0))
        cols.append(m.start() + 1)
    return tokens, cols


def parse_sequence(text: str, sample_rate: float = 1e6) -> Sequence:
    """Parse sequence text; an optional `samplerate` directive overrides the default."""
    events: List[PulseEvent] = []
    fs = sample_rate
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        base_col = 1
        for statement in raw_line.split(";"):
            stripped = statement.split("#", 1)[0]
            tokens, cols = _tokenize(stripped)
            cols = [c + base_col - 1 for c in cols]
            base_col += len(statement) + 1
            if not tokens:
                continue
            kw = tokens[0]
            if kw == "samplerate":
                if len(tokens) != 2:
                    raise SequenceError("samplerate takes one value", line_no, cols[0])
                fs = _parse_number(tokens[1], line_no, cols[1])
            elif kw == "rf":
                p = _split_params(tokens[1:], line_no, cols[1:],
                                  {"area", "phase", "at", "rabi", "duration"},
                                  {"at"}, "rf")
                events.append(_build_rf(p, line_no, cols[0]))
            elif kw == "stark":
                p = _split_params(tokens[1:], line_no, cols[1:],
                                  {"E", "Ts", "at", "sign"}, {"E", "Ts", "at"}, "stark")
                events.append(StarkPulse(start=p["at"], duration=p["Ts"],
                                         amplitude=p["E"], sign=p.get("sign", 1.0)))
            elif kw == "acquire":
                if len(tokens) < 2 or "=" in tokens[1]:
                    raise SequenceError("acquire requires a label", line_no, cols[0])
                label = tokens[1]
                p = _split_params(tokens[2:], line_no, cols[2:],
                                  {"from", "to", "duration"}, {"from"}, "acquire")
                if "duration" in p:
                    duration = p["duration"]
                elif "to" in p:
                    duration = p["to"] - p["from"]
                else:
                    raise SequenceError(f"acquire {label!r} needs to= or duration=",
                                        line_no, cols[0])
                if duration < 0:
                    raise SequenceError(f"acquire {label!r} has to < from", line_no, cols[0])
                events.append(Acquire(start=p["from"], duration=duration, label=label))
            elif kw == "wait":
                p = _split_params(tokens[1:], line_no, cols[1:],
                                  {"at", "duration"}, {"at", "duration"}, "wait")
                events.append(Wait(start=p["at"], duration=p["duration"]))
            else:
                raise SequenceError(f"unknown event keyword {kw!r}", line_no, cols[0])
    events.sort(key=lambda ev: ev.start)
    return Sequence(events=tuple(events), sample_rate=fs)


def _build_rf(p: Dict[str, float], line: int, col: int) -> RfPulse:
    area, rabi, duration = p.get("area"), p.get("rabi"), p.get("duration")
    if rabi is None and duration not in (None, 0.0):
        raise SequenceError("rf duration requires a rabi frequency", line, col)
    if area is None:
        if rabi is None or duration is None:
            raise SequenceError("rf needs area, or rabi with duration", line, col)
        area = 2.0 * math.pi * rabi * duration
    if rabi is not None and duration is None:
        duration = area / (2.0 * math.pi * rabi)
    return RfPulse(start=p["at"], area=area, phase=p.get("phase", 0.0),
                   rabi=rabi, duration=duration or 0.0)


def _fmt(x: float) -> str:
    return repr(float(x))


def render_sequence(seq: Sequence) -> str:
    """Render to grammar text; parse(render(seq)) == seq."""
    lines = [f"samplerate {_fmt(seq.sample_rate)}"]
    for ev in seq.events:
        if isinstance(ev, RfPulse):
            parts = [f"rf area={_fmt(ev.area)}", f"phase={_fmt(ev.phase)}",
                     f"at={_fmt(ev.start)}"]
            if not ev.ideal:
                parts += [f"rabi={_fmt(ev.rabi)}", f"duration={_fmt(ev.duration)}"]
            lines.append(" ".join(parts))
        elif isinstance(ev, StarkPulse):
            lines.append(
                f"stark E={_fmt(ev.amplitude)} Ts={_fmt(ev.duration)} "
                f"at={_fmt(ev.start)} sign={_fmt(ev.sign)}"
            )
        elif isinstance(ev, Acquire):
            lines.append(
                f"acquire {ev.label} from={_fmt(ev.start)} duration={_fmt(ev.duration)}"
            )
        elif isinstance(ev, Wait):
            lines.append(f"wait at={_fmt(ev.start)} duration={_fmt(ev.duration)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# canonical two-rephasing-pulse timeline


@dataclass(frozen=True)
class SemmTimes:
    """Derived instants of the canonical timeline (all seconds)."""

    t1: float
    t2: float
    t3: float
    t4: float
    t5: float
    t6: float
    t7: float

    @property
    def stimulated_echo(self) -> float:
        """Arrival of the stimulated echo read out by the second rephasing pulse."""
        return self.t6 + (self.t3 - self.t1)


def semm_times(t1: float, t2: float, t3: float, t5_offset: Optional[float] = None) -> SemmTimes:
    """Echo-time identities: t4 = 2*t3 - t1, t6 = t5 + (t3 - t2), t7 = 2*t6 - t4.

    t5_offset (delay of the second modulation pulse after the first echo)
    defaults to (t4 - t2)/2, which places the stimulated echo strictly
    before the output echo exactly when t2 - t1 < (t4 - t2)/2 holds.
    """
    t4 = 2.0 * t3 - t1
    if t5_offset is None:
        t5_offset = 0.5 * (t4 - t2)
    t5 = t4 + t5_offset
    t6 = t5 + (t3 - t2)
    t7 = 2.0 * t6 - t4
    return SemmTimes(t1, t2, t3, t4, t5, t6, t7)


def make_semm(
    t1: float,
    t2: float,
    t3: float,
    *,
    stark_amplitude: float,
    stark_duration: float,
    t5_offset: Optional[float] = None,
    pi_pulse: Optional[RfParams] = None,
    input_pulse: Optional[RfParams] = None,
    second_stark_sign: float = 1.0,
    sample_rate: float = 1e6,
    echo_window: Optional[float] = None,
    tail: bool = False,
) -> Sequence:
    """Build the full memory sequence.

    Input pulse at t1, modulation pulse (amplitude, Ts) at t2, first
    rephasing pulse at t3, echo window centered on t4 = 2*t3 - t1, an
    identical modulation pulse at t5 = t4 + t5_offset, second rephasing
    pulse at t6, output window centered on t7 = 2*t6 - t4.  Window grids
    place a sample exactly on the echo centers.

    second_stark_sign=-1 flips the field of the second modulation pulse
    (the deliberately wrong phase-doubling variant); +1 reproduces the
    protocol (both pulses identical).  tail=True adds an acquire spanning
    from just after the second rephasing pulse to past t7, which contains
    the stimulated echo and the output echo.
    """
    pi_pulse = pi_pulse or RfParams(area=math.pi)
    input_pulse = input_pulse or RfParams(area=math.pi / 2.0)
    if not (t1 < t2 < t3):
        raise ConstraintError(f"need t1 < t2 < t3, got {t1!r}, {t2!r}, {t3!r}")
    times = semm_times(t1, t2, t3, t5_offset)
    sep_limit = 0.5 * (times.t4 - t2)
    if not (t2 - t1 < sep_limit):
        raise ConstraintError(
            "stimulated-echo separation requires choosing t2-t1 < (t4-t2)/2; "
            f"got t2-t1 = {t2 - t1!r} and (t4-t2)/2 = {sep_limit!r}"
        )
    half_pi = 0.5 * pi_pulse.duration
    if t2 + stark_duration > t3 - half_pi:
        raise ConstraintError(
            f"stark pulse (Ts={stark_duration!r}) does not fit between t2 and "
            f"the rephasing pulse at t3"
        )
    if t1 + 0.5 * input_pulse.duration > t2:
        raise ConstraintError("input pulse overlaps the first stark pulse")

    dt = 1.0 / sample_rate
    sep = (times.t5 - times.t4) - (t2 - t1)

    def window(center: float, limits: List[float]) -> Acquire:
        if echo_window is not None:
            half = 0.5 * echo_window
        else:
            half = min(min(limits), 512.0 * dt)
        n_half = max(2, int(math.floor(half * sample_rate)))
        return Acquire(start=center - n_half * dt, duration=2 * n_half * dt, label="")

    w1_limits = [0.4 * (times.t4 - t3 - half_pi), 0.4 * (times.t5 - times.t4)]
    echo1 = replace(window(times.t4, w1_limits), label="echo1")
    w2_limits = [0.4 * (times.t7 - times.t6 - half_pi)]
    if sep > 0:
        w2_limits.append(0.45 * sep)
    echo2 = replace(window(times.t7, w2_limits), label="echo2")

    events: List[PulseEvent] = [
        input_pulse.at(t1),
        StarkPulse(start=t2, duration=stark_duration, amplitude=stark_amplitude, sign=1.0),
        pi_pulse.at(t3),
        echo1,
        StarkPulse(start=times.t5, duration=stark_duration, amplitude=stark_amplitude,
                   sign=second_stark_sign),
        pi_pulse.at(times.t6),
        echo2,
    ]
    if tail:
        start = times.t6 + half_pi + dt
        end = times.t7 + 0.4 * (times.t7 - times.t6)
        events.append(Acquire(start=start, duration=end - start, label="tail"))
    events.sort(key=lambda ev: ev.start)
    return Sequence(events=tuple(events), sample_rate=sample_rate)
