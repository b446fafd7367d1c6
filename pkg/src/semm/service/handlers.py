"""Request handlers shared by the HTTP app and the in-process CLI client."""

from __future__ import annotations

import math
from datetime import datetime, timezone
from typing import Dict, List

import numpy as np

from .. import __version__
from ..analysis import jittered_sequence, solve_cancellation, suppression, sweep_modulation
from ..config import (build_distribution, build_ensemble_spec, build_semm_kwargs)
from ..dynamics import run_sequence
from ..ensemble import build_ensemble
from ..errors import NoRootFoundError, ValidationError
from ..noise import CavityParams, leaked_noise, spontaneous_photons, table_e0
from ..sequence import make_semm, parse_sequence
from ..tomography import run_tomography
from . import schemas as sm


def _meta(req, seed=None) -> sm.Meta:
    return sm.Meta(
        version=__version__,
        generated_at=datetime.now(timezone.utc).isoformat(),
        seed=seed,
        request=req.model_dump(mode="json"),
    )


def handle_simulate(req: sm.SimulateRequest) -> sm.SimulateResponse:
    ens = build_ensemble(build_ensemble_spec(req.ensemble))
    seq = parse_sequence(req.sequence.text, req.sequence.sample_rate)
    if req.shots < 1:
        raise ValidationError("shots must be >= 1")
    rng = np.random.default_rng(req.seed)
    sums: Dict[str, np.ndarray] = {}
    intens: Dict[str, np.ndarray] = {}
    times: Dict[str, np.ndarray] = {}
    for _ in range(req.shots):
        shot_seq = jittered_sequence(seq, req.jitter, rng) if req.jitter else seq
        noise_seed = int(rng.integers(2**62)) if req.detection_noise > 0 else 0
        result = run_sequence(ens, shot_seq, keep_parity=req.keep_parity,
                              detection_noise=req.detection_noise,
                              noise_seed=noise_seed)
        for label, trace in result.traces.items():
            if label not in sums:
                sums[label] = np.zeros(len(trace.values), dtype=complex)
                intens[label] = np.zeros(len(trace.values))
                times[label] = trace.times
            sums[label] += trace.values
            intens[label] += np.abs(trace.values) ** 2
    traces = []
    for label in sorted(sums):
        mean = sums[label] / req.shots
        traces.append(sm.TraceData(
            label=label,
            times=[float(t) for t in times[label]],
            re=[float(v) for v in mean.real],
            im=[float(v) for v in mean.imag],
            abs2=[float(v) for v in intens[label] / req.shots],
        ))
    return sm.SimulateResponse(meta=_meta(req, req.seed), traces=traces)


def handle_sweep(req: sm.SweepRequest) -> sm.SweepResponse:
    ens = build_ensemble(build_ensemble_spec(req.ensemble))
    base_seq = make_semm(**build_semm_kwargs(req.semm))
    oracle = build_distribution(req.ensemble.stark_shape)
    points = sweep_modulation(ens, base_seq, req.amplitude, req.ts.resolve(),
                              echo_label=req.echo_label, oracle=oracle)
    return sm.SweepResponse(
        meta=_meta(req, req.seed),
        amplitude=req.amplitude,
        points=[sm.SweepPointData(ts=p.ts, normalized_intensity=p.normalized_intensity,
                                  oracle=p.oracle) for p in points],
    )


def handle_suppression(req: sm.SuppressionRequest) -> sm.SuppressionResponse:
    ens = build_ensemble(build_ensemble_spec(req.ensemble))
    kwargs = build_semm_kwargs(req.semm)
    seq_on = make_semm(**kwargs)
    seq_off = make_semm(**{**kwargs, "stark_amplitude": 0.0})
    result = suppression(ens, seq_on, seq_off, echo_label=req.echo_label,
                         shots=req.shots, jitter=req.jitter, seed=req.seed)
    return sm.SuppressionResponse(
        meta=_meta(req, req.seed),
        mu=result.mu,
        peak_on=result.echo_on.intensity,
        peak_off=result.echo_off.intensity,
        times={"on": result.echo_on.peak_time, "off": result.echo_off.peak_time},
        mean_intensity_on=result.mean_intensity_on,
        mean_intensity_off=result.mean_intensity_off,
        shots=result.shots,
    )


def handle_tomography(req: sm.TomographyRequest) -> sm.TomographyResponse:
    ens = build_ensemble(build_ensemble_spec(req.ensemble))
    kwargs = build_semm_kwargs(req.semm)
    kwargs.pop("tail", None)
    result = run_tomography(ens, kwargs, z_mode=req.z_mode)
    states = [
        sm.StateData(
            state=s.state,
            fidelity=s.fidelity,
            rho_on=sm.MatrixData(**s.rho_on.as_json()),
            rho_off=sm.MatrixData(**s.rho_off.as_json()),
            z_on=s.z_on,
            z_off=s.z_off,
        )
        for s in result.states
    ]
    return sm.TomographyResponse(meta=_meta(req, req.seed), states=states,
                                 average_fidelity=result.average_fidelity)


def handle_cancel_solve(req: sm.CancelSolveRequest) -> sm.CancelSolveResponse:
    dist = build_distribution(req.distribution)
    try:
        root = solve_cancellation(dist, req.x_max)
    except NoRootFoundError as err:
        return sm.CancelSolveResponse(meta=_meta(req), found=False,
                                      min_value=err.min_value, x_at_min=err.x_at_min)
    return sm.CancelSolveResponse(meta=_meta(req), found=True, root=root)


def handle_noise(req: sm.NoiseRequest) -> sm.NoiseResponse:
    cavity = CavityParams(finesse=req.finesse, opacity=req.opacity)
    n_sp = spontaneous_photons(cavity)
    leaked = leaked_noise(req.mu, cavity, threshold=req.threshold)
    return sm.NoiseResponse(
        meta=_meta(req), mu=req.mu, finesse=req.finesse, opacity=req.opacity,
        spontaneous_photons=n_sp, leaked_photons=leaked.photons,
        single_photon_ok=leaked.single_photon_ok, threshold=req.threshold,
    )


def handle_table(req: sm.TableRequest) -> sm.TableResponse:
    rows = None
    if req.rows is not None:
        rows = [(r.name, r.t2, r.k, r.expected_e0) for r in req.rows]
    result = table_e0(rows, flag_above=req.flag_above)
    return sm.TableResponse(
        meta=_meta(req),
        rows=[sm.TableRowData(name=r.name, t2=r.t2, k=r.k, e0=r.e0,
                              expected_e0=r.expected_e0, deviation=r.deviation,
                              flagged=r.flagged) for r in result],
    )


_REQUEST_TYPES = {
    "simulate": sm.SimulateRequest,
    "sweep": sm.SweepRequest,
    "suppression": sm.SuppressionRequest,
    "tomography": sm.TomographyRequest,
    "cancel-solve": sm.CancelSolveRequest,
    "noise": sm.NoiseRequest,
    "table": sm.TableRequest,
}

HANDLERS = {
    "simulate": handle_simulate,
    "sweep": handle_sweep,
    "suppression": handle_suppression,
    "tomography": handle_tomography,
    "cancel-solve": handle_cancel_solve,
    "noise": handle_noise,
    "table": handle_table,
}

RESPONSE_TYPES = {
    "simulate": sm.SimulateResponse,
    "sweep": sm.SweepResponse,
    "suppression": sm.SuppressionResponse,
    "tomography": sm.TomographyResponse,
    "cancel-solve": sm.CancelSolveResponse,
    "noise": sm.NoiseResponse,
    "table": sm.TableResponse,
}


def handle_validate(req: sm.ValidateRequest) -> sm.ValidateResponse:
    """Dry-run: parse the request and construct every domain object, no runs."""
    try:
        model = _REQUEST_TYPES[req.command].model_validate(req.request)
        if isinstance(model, (sm.SimulateRequest, sm.SweepRequest,
                              sm.SuppressionRequest, sm.TomographyRequest)):
            build_ensemble_spec(model.ensemble)
        if isinstance(model, sm.SimulateRequest):
            parse_sequence(model.sequence.text, model.sequence.sample_rate)
        if isinstance(model, (sm.SweepRequest, sm.SuppressionRequest,
                              sm.TomographyRequest)):
            make_semm(**build_semm_kwargs(model.semm))
        if isinstance(model, sm.SweepRequest):
            model.ts.resolve()
        if isinstance(model, sm.CancelSolveRequest):
            build_distribution(model.distribution)
            if model.x_max <= 0:
                raise ValidationError("x_max must be > 0")
        if isinstance(model, sm.NoiseRequest):
            cavity = CavityParams(model.finesse, model.opacity)
            spontaneous_photons(cavity)
        if isinstance(model, sm.TableRequest) and model.rows is not None:
            table_e0([(r.name, r.t2, r.k, r.expected_e0) for r in model.rows])
    except (ValidationError, ValueError, OverflowError) as err:
        return sm.ValidateResponse(ok=False, command=req.command, detail=str(err))
    return sm.ValidateResponse(ok=True, command=req.command, detail="config OK")
