"""Run-configuration ingestion: YAML file -> request models -> domain objects.

One YAML file is the artifact of record for an experiment.  Shared
subtrees (ensemble, seed, shots, jitter) sit at the top level; each
subcommand reads its own section.  File references (sequence file,
table CSV) are resolved client-side relative to the config file, so the
service only ever sees inline data.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Union

import yaml

from .distributions import (Delta, Distribution, Gaussian, Lorentzian, Mixture,
                            Table, Uniform)
from .ensemble import EnsembleSpec, MonteCarlo, Quadrature, RelaxationSpec
from .errors import ValidationError
from .sequence import RfParams
from .service import schemas as sm


def load_config(path: Union[str, Path]) -> dict:
    """Read the YAML config and resolve file references inline."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be a mapping")
    base = path.parent
    _resolve_files(cfg, base)
    return cfg


def _resolve_files(node, base: Path) -> None:
    if isinstance(node, dict):
        if "file" in node and "text" not in node and "kind" not in node:
            seq_path = base / str(node.pop("file"))
            if not seq_path.exists():
                raise ValidationError(f"sequence file {seq_path} does not exist")
            node["text"] = seq_path.read_text()
        if node.get("kind") == "table" and "csv" in node:
            csv_path = base / str(node.pop("csv"))
            if not csv_path.exists():
                raise ValidationError(f"table CSV {csv_path} does not exist")
            table = Table.from_csv(csv_path)
            node["rows"] = [[float(k), float(d)] for k, d in zip(table.ks, table.ds)]
        for value in node.values():
            _resolve_files(value, base)
    elif isinstance(node, list):
        for value in node:
            _resolve_files(value, base)


# ------------------------------------------------------------- model -> domain


def build_distribution(model: "sm.DistributionModel") -> Distribution:
    if isinstance(model, sm.DeltaModel):
        dist = Delta(model.k0)
    elif isinstance(model, sm.GaussianModel):
        dist = (Gaussian.from_fwhm(model.k0, model.fwhm) if model.fwhm is not None
                else Gaussian(model.k0, model.sigma))
    elif isinstance(model, sm.LorentzianModel):
        dist = Lorentzian(model.k0, model.gamma)
    elif isinstance(model, sm.UniformModel):
        dist = Uniform(model.lo, model.hi)
    elif isinstance(model, sm.MixtureModel):
        dist = Mixture([(c.weight, build_distribution(c.distribution))
                        for c in model.components])
    elif isinstance(model, sm.TableModel):
        dist = Table([(float(k), float(d)) for k, d in model.rows])
    else:
        raise ValidationError(f"unknown distribution model {type(model).__name__}")
    dist.validate()
    return dist


def build_ensemble_spec(model: "sm.EnsembleModel") -> EnsembleSpec:
    s = model.sampling
    if s.mode == "monte_carlo":
        sampling = MonteCarlo(seed=s.seed)
    else:
        sampling = Quadrature(rule=s.rule, stark_nodes=s.stark_nodes,
                              line_nodes=s.line_nodes, x_max=s.x_max)
    relax = RelaxationSpec(
        t1=model.relaxation.t1 if model.relaxation.t1 is not None else math.inf,
        t2=model.relaxation.t2 if model.relaxation.t2 is not None else math.inf,
    )
    spec = EnsembleSpec(
        line_shape=build_distribution(model.line_shape),
        stark_shape=build_distribution(model.stark_shape),
        n_centers=model.n_centers,
        sampling=sampling,
        relaxation=relax,
    )
    spec.validate()
    return spec


def build_rf_params(model: Optional["sm.RfParamsModel"]) -> Optional[RfParams]:
    if model is None:
        return None
    return RfParams(area=model.area, phase=model.phase, rabi=model.rabi)


def build_semm_kwargs(model: "sm.SemmModel") -> dict:
    kwargs = dict(
        t1=model.t1, t2=model.t2, t3=model.t3,
        stark_amplitude=model.stark_amplitude,
        stark_duration=model.stark_duration,
        t5_offset=model.t5_offset,
        second_stark_sign=model.second_stark_sign,
        sample_rate=model.sample_rate,
        echo_window=model.echo_window,
        tail=model.tail,
    )
    if model.pi_pulse is not None:
        kwargs["pi_pulse"] = build_rf_params(model.pi_pulse)
    if model.input_pulse is not None:
        kwargs["input_pulse"] = build_rf_params(model.input_pulse)
    return kwargs


# -------------------------------------------------------- config -> requests

_SECTION_KEYS = {
    "simulate": ("simulate",),
    "sweep": ("sweep",),
    "suppression": ("suppression",),
    "tomography": ("tomography",),
    "cancel-solve": ("cancel_solve", "cancel-solve"),
    "noise": ("noise",),
    "table": ("table",),
}


def _section(cfg: dict, command: str) -> dict:
    for key in _SECTION_KEYS[command]:
        if key in cfg:
            section = cfg[key]
            if not isinstance(section, dict):
                raise ValidationError(f"config section {key!r} must be a mapping")
            return section
    return {}


def request_from_config(command: str, cfg: dict, seed: Optional[int] = None):
    """Assemble the request model for a subcommand from the loaded config."""
    if command not in _SECTION_KEYS:
        raise ValidationError(f"unknown subcommand {command!r}")
    section = _section(cfg, command)
    eff_seed = seed if seed is not None else int(cfg.get("seed", 0))

    def need(key):
        if key in section:
            return section[key]
        if key in cfg:
            return cfg[key]
        raise ValidationError(f"{command}: missing config key {key!r}")

    if command == "simulate":
        return sm.SimulateRequest(
            ensemble=need("ensemble"),
            sequence=need("sequence"),
            seed=eff_seed,
            shots=int(section.get("shots", cfg.get("shots", 1))),
            jitter=section.get("jitter", cfg.get("jitter")),
            detection_noise=float(section.get("detection_noise", 0.0)),
            keep_parity=bool(section.get("keep_parity", False)),
        )
    if command == "sweep":
        return sm.SweepRequest(
            ensemble=need("ensemble"), semm=need("semm"),
            amplitude=float(need("amplitude")), ts=section.get("ts", {}),
            echo_label=section.get("echo_label", "echo1"), seed=eff_seed,
        )
    if command == "suppression":
        return sm.SuppressionRequest(
            ensemble=need("ensemble"), semm=need("semm"),
            shots=int(section.get("shots", cfg.get("shots", 1))),
            jitter=section.get("jitter", cfg.get("jitter")),
            echo_label=section.get("echo_label", "echo1"), seed=eff_seed,
        )
    if command == "tomography":
        return sm.TomographyRequest(
            ensemble=need("ensemble"), semm=need("semm"),
            z_mode=section.get("z_mode", "direct"), seed=eff_seed,
        )
    if command == "cancel-solve":
        return sm.CancelSolveRequest(
            distribution=need("distribution"), x_max=float(need("x_max")),
        )
    if command == "noise":
        return sm.NoiseRequest(**section)
    return sm.TableRequest(**section)
