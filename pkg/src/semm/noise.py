"""Cavity noise budget and operating-field calculator.

A memory inside a resonant cavity amplifies spontaneous emission through
the Purcell effect and medium gain, producing n_sp = F*(exp(F*d) - 1)
photons in the output mode, with F the cavity finesse and d the single-pass
memory opacity.  An intermediate-echo suppression of mu reduces the leaked
rephased-emission noise to mu*n_sp; operation below one leaked photon is
the single-photon criterion (threshold configurable, default 1.0).

The operating field for a modulation pulse as long as the coherence
lifetime is e0 = 1/(4*k*t2): the quarter-cycle cancellation condition with
Ts = t2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from .errors import ValidationError

# exp overflow guard: F*d beyond this would exceed double range
_MAX_EXPONENT = 700.0

# built-in reference systems: (name, t2 seconds, k in Hz/(V/cm), quoted e0 V/cm)
DEFAULT_SYSTEMS: Tuple[Tuple[str, float, float, Optional[float]], ...] = (
    ("Eu:YSO optical", 2.6e-3, 27000.0, 0.005),
    ("Er:CaWO4 electron spin", 0.05e-3, 399.0, 12.0),
    ("NV in diamond electron spin", 1.8e-3, 17.0, 8.2),
    ("Eu:YSO nuclear spin", 26e-3, 0.1, 9.6),
)


@dataclass(frozen=True)
class CavityParams:
    finesse: float
    opacity: float

    def validate(self):
        if self.finesse <= 0:
            raise ValidationError("finesse must be > 0")
        if self.opacity <= 0:
            raise ValidationError("opacity must be > 0")


@dataclass(frozen=True)
class LeakedNoise:
    photons: float
    single_photon_ok: bool
    threshold: float


@dataclass(frozen=True)
class SystemRow:
    name: str
    t2: float
    k: float
    e0: float                        # computed 1/(4 k t2), V/cm
    expected_e0: Optional[float] = None
    deviation: Optional[float] = None   # |e0 - expected| / expected
    flagged: bool = False               # deviation > 10%


def spontaneous_photons(c: CavityParams) -> float:
    """n_sp = F*(exp(F*d) - 1)."""
    c.validate()
    exponent = c.finesse * c.opacity
    if exponent > _MAX_EXPONENT:
        raise OverflowError(
            f"finesse*opacity = {exponent:.3g} exceeds the evaluable range"
        )
    return c.finesse * math.expm1(exponent)


def leaked_noise(mu: float, c: CavityParams, threshold: float = 1.0) -> LeakedNoise:
    """Rephased-emission photons leaking past a suppression of mu."""
    if mu < 0:
        raise ValidationError("mu must be >= 0")
    photons = mu * spontaneous_photons(c)
    return LeakedNoise(photons=photons, single_photon_ok=photons < threshold,
                       threshold=threshold)


def table_e0(rows: Optional[Sequence[Tuple]] = None,
             flag_above: float = 0.10) -> List[SystemRow]:
    """Operating field e0 = 1/(4*k*t2) per system.

    Rows are (name, t2, k) or (name, t2, k, expected_e0); with an
    expectation present the computed value is compared and flagged when it
    deviates by more than flag_above (fractional).  Defaults to the
    built-in reference systems.
    """
    if rows is None:
        rows = DEFAULT_SYSTEMS
    out: List[SystemRow] = []
    for row in rows:
        name, t2, k = row[0], float(row[1]), float(row[2])
        expected = float(row[3]) if len(row) > 3 and row[3] is not None else None
        if t2 <= 0:
            raise ValidationError(f"row {name!r}: t2 must be > 0")
        if k <= 0:
            raise ValidationError(f"row {name!r}: k must be > 0")
        e0 = 1.0 / (4.0 * k * t2)
        deviation = None
        flagged = False
        if expected is not None:
            deviation = abs(e0 - expected) / expected
            flagged = deviation > flag_above
        out.append(SystemRow(name=name, t2=t2, k=k, e0=e0,
                             expected_e0=expected, deviation=deviation,
                             flagged=flagged))
    return out
