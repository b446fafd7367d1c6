"""Pydantic request/response models for the service API.

These mirror the YAML run-configuration subtrees one to one, so a config
file loads directly into a request model.  Distribution specs are tagged
unions on `kind`; rf areas and phases accept pi expressions ("pi/2") as
well as numbers; null lifetimes mean infinite.
"""

from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..sequence import _parse_number


def _angle(value) -> float:
    if isinstance(value, str):
        return _parse_number(value.strip(), 1, 1)
    return float(value)


class DeltaModel(BaseModel):
    kind: Literal["delta"]
    k0: float


class GaussianModel(BaseModel):
    kind: Literal["gaussian"]
    k0: float = 0.0
    sigma: Optional[float] = None
    fwhm: Optional[float] = None

    @model_validator(mode="after")
    def _one_width(self):
        if (self.sigma is None) == (self.fwhm is None):
            raise ValueError("gaussian needs exactly one of sigma or fwhm")
        return self


class LorentzianModel(BaseModel):
    kind: Literal["lorentzian"]
    k0: float = 0.0
    gamma: float


class UniformModel(BaseModel):
    kind: Literal["uniform"]
    lo: float
    hi: float


class MixtureComponent(BaseModel):
    weight: float
    distribution: "DistributionModel"


class MixtureModel(BaseModel):
    kind: Literal["mixture"]
    components: List[MixtureComponent]


class TableModel(BaseModel):
    kind: Literal["table"]
    rows: List[Tuple[float, float]]


DistributionModel = Union[
    DeltaModel, GaussianModel, LorentzianModel, UniformModel, MixtureModel, TableModel
]
MixtureComponent.model_rebuild()


class SamplingModel(BaseModel):
    mode: Literal["quadrature", "monte_carlo"] = "quadrature"
    rule: Literal["midpoint", "gauss"] = "midpoint"
    seed: int = 0
    stark_nodes: Optional[int] = None
    line_nodes: Optional[int] = None
    x_max: Optional[float] = None


class RelaxationModel(BaseModel):
    t1: Optional[float] = None   # seconds; null = infinite
    t2: Optional[float] = None


class EnsembleModel(BaseModel):
    n_centers: int
    line_shape: DistributionModel = Field(discriminator="kind")
    stark_shape: DistributionModel = Field(discriminator="kind")
    sampling: SamplingModel = SamplingModel()
    relaxation: RelaxationModel = RelaxationModel()


class RfParamsModel(BaseModel):
    area: float
    phase: float = 0.0
    rabi: Optional[float] = None

    @field_validator("area", "phase", mode="before")
    @classmethod
    def _pi_expr(cls, v):
        return _angle(v)


class SemmModel(BaseModel):
    """Arguments of the canonical timeline builder."""

    t1: float
    t2: float
    t3: float
    stark_amplitude: float
    stark_duration: float
    t5_offset: Optional[float] = None
    second_stark_sign: float = 1.0
    sample_rate: float = 1e6
    echo_window: Optional[float] = None
    tail: bool = False
    pi_pulse: Optional[RfParamsModel] = None
    input_pulse: Optional[RfParamsModel] = None


class SequenceSource(BaseModel):
    text: str
    sample_rate: float = 1e6


class TsGrid(BaseModel):
    values: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = None

    def resolve(self) -> List[float]:
        if self.values is not None:
            return [float(v) for v in self.values]
        if None in (self.start, self.stop, self.num):
            raise ValueError("ts grid needs either values or start/stop/num")
        if self.num < 2:
            raise ValueError("ts grid num must be >= 2")
        step = (self.stop - self.start) / (self.num - 1)
        return [self.start + i * step for i in range(self.num)]


# ------------------------------------------------------------------ requests


class SimulateRequest(BaseModel):
    ensemble: EnsembleModel
    sequence: SequenceSource
    seed: int = 0
    shots: int = 1
    jitter: Optional[Dict[str, float]] = None
    detection_noise: float = 0.0
    keep_parity: bool = False


class SweepRequest(BaseModel):
    ensemble: EnsembleModel
    semm: SemmModel
    amplitude: float
    ts: TsGrid
    echo_label: str = "echo1"
    seed: int = 0


class SuppressionRequest(BaseModel):
    ensemble: EnsembleModel
    semm: SemmModel
    shots: int = 1
    jitter: Optional[Dict[str, float]] = None
    echo_label: str = "echo1"
    seed: int = 0


class TomographyRequest(BaseModel):
    ensemble: EnsembleModel
    semm: SemmModel
    z_mode: Literal["direct", "sequence"] = "direct"
    seed: int = 0


class CancelSolveRequest(BaseModel):
    distribution: DistributionModel = Field(discriminator="kind")
    x_max: float


class NoiseRequest(BaseModel):
    mu: float = 1.5e-5
    finesse: float = 100.0
    opacity: float = 0.02
    threshold: float = 1.0


class TableRowModel(BaseModel):
    name: str
    t2: float
    k: float
    expected_e0: Optional[float] = None


class TableRequest(BaseModel):
    rows: Optional[List[TableRowModel]] = None
    flag_above: float = 0.10


RequestModel = Union[
    SimulateRequest, SweepRequest, SuppressionRequest, TomographyRequest,
    CancelSolveRequest, NoiseRequest, TableRequest,
]


class ValidateRequest(BaseModel):
    """Dry-run payload: which subcommand plus its request body."""

    command: Literal["simulate", "sweep", "suppression", "tomography",
                     "cancel-solve", "noise", "table"]
    request: dict


# ----------------------------------------------------------------- responses


class Meta(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    version: str
    generated_at: str
    seed: Optional[int] = None
    request: dict


class TraceData(BaseModel):
    label: str
    times: List[float]
    re: List[float]
    im: List[float]
    abs2: List[float]


class EchoSummary(BaseModel):
    label: str
    peak_time: float
    re: float
    im: float
    intensity: float
    integrated_intensity: float
    fwhm: Optional[float] = None


class SimulateResponse(BaseModel):
    meta: Meta
    traces: List[TraceData]


class SweepPointData(BaseModel):
    ts: float
    normalized_intensity: float
    oracle: Optional[float] = None


class SweepResponse(BaseModel):
    meta: Meta
    amplitude: float
    points: List[SweepPointData]


class SuppressionResponse(BaseModel):
    meta: Meta
    mu: float
    peak_on: float
    peak_off: float
    times: Dict[str, float]
    mean_intensity_on: float
    mean_intensity_off: float
    shots: int


class MatrixData(BaseModel):
    re: List[List[float]]
    im: List[List[float]]


class StateData(BaseModel):
    state: str
    fidelity: float
    rho_on: MatrixData
    rho_off: MatrixData
    z_on: float
    z_off: float


class TomographyResponse(BaseModel):
    meta: Meta
    states: List[StateData]
    average_fidelity: float


class CancelSolveResponse(BaseModel):
    meta: Meta
    found: bool
    root: Optional[float] = None
    min_value: Optional[float] = None
    x_at_min: Optional[float] = None


class NoiseResponse(BaseModel):
    meta: Meta
    mu: float
    finesse: float
    opacity: float
    spontaneous_photons: float
    leaked_photons: float
    single_photon_ok: bool
    threshold: float


class TableRowData(BaseModel):
    name: str
    t2: float
    k: float
    e0: float
    expected_e0: Optional[float] = None
    deviation: Optional[float] = None
    flagged: bool = False


class TableResponse(BaseModel):
    meta: Meta
    rows: List[TableRowData]


class ValidateResponse(BaseModel):
    ok: bool
    command: str
    detail: str
