"""Deterministic rendering of traces and reports.

CSV and JSON payloads are byte-reproducible for identical inputs: floats
use shortest round-trip formatting, JSON keys are sorted, and the only
volatile field (the generation timestamp) lives in the report meta header.
"""

from __future__ import annotations

import json
import math
from typing import List

from .service import schemas as sm


def _f(x: float) -> str:
    return repr(float(x))


def trace_csv(trace: "sm.TraceData") -> str:
    """Columns: time_s, re_P, im_P, abs_P, abs2_P (abs2 is the shot average)."""
    lines = ["time_s,re_P,im_P,abs_P,abs2_P"]
    for t, re, im, a2 in zip(trace.times, trace.re, trace.im, trace.abs2):
        lines.append(
            f"{_f(t)},{_f(re)},{_f(im)},{_f(math.hypot(re, im))},{_f(a2)}"
        )
    return "\n".join(lines) + "\n"


def sweep_csv(points: List["sm.SweepPointData"]) -> str:
    lines = ["Ts_s,normalized_intensity,oracle_value"]
    for p in points:
        oracle = _f(p.oracle) if p.oracle is not None else ""
        lines.append(f"{_f(p.ts)},{_f(p.normalized_intensity)},{oracle}")
    return "\n".join(lines) + "\n"


def json_report(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ": "), indent=1) + "\n"


def noise_text(resp: "sm.NoiseResponse") -> str:
    verdict = "yes" if resp.single_photon_ok else "NO"
    return (
        f"{'finesse':>22s}  {resp.finesse:g}\n"
        f"{'opacity':>22s}  {resp.opacity:g}\n"
        f"{'suppression mu':>22s}  {resp.mu:g}\n"
        f"{'spontaneous photons':>22s}  {resp.spontaneous_photons:.6g}\n"
        f"{'leaked photons':>22s}  {resp.leaked_photons:.6g}\n"
        f"{'single photon ok':>22s}  {verdict} (threshold {resp.threshold:g})\n"
    )


def table_text(resp: "sm.TableResponse") -> str:
    header = f"{'system':<30s} {'T2 (ms)':>9s} {'k (Hz cm/V)':>12s} {'E0 (V/cm)':>11s} {'quoted':>8s} {'flag':>5s}"
    lines = [header, "-" * len(header)]
    for row in resp.rows:
        quoted = f"{row.expected_e0:g}" if row.expected_e0 is not None else "-"
        flag = "DEV" if row.flagged else ""
        lines.append(
            f"{row.name:<30s} {row.t2 * 1e3:>9.3g} {row.k:>12g} {row.e0:>11.4g} "
            f"{quoted:>8s} {flag:>5s}"
        )
    return "\n".join(lines) + "\n"
