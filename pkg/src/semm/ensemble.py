"""Two-level emitter ensembles over detuning and Stark-coefficient distributions.

An ensemble is the tensor of a line shape (detunings, Hz) and a Stark
coefficient magnitude distribution (Hz per V/cm), split into two
inversion-symmetry subgroups of opposite parity.  A given applied field
shifts one subgroup up in frequency and the other down, so every sampled
coefficient appears twice, once per parity, with identical weight.

Construction is either seeded Monte Carlo or deterministic quadrature.
Quadrature nodes with negative Stark coefficient are folded onto the
opposite parity (shift = parity * k * E depends only on the product), which
keeps the stored magnitudes nonnegative without touching the physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .distributions import Delta, Distribution, gauss_nodes, gauss_panel_nodes, midpoint_nodes
from .errors import ValidationError


class BlochVector(NamedTuple):
    u: float
    v: float
    w: float


@dataclass(frozen=True)
class Center:
    """One emitter: detuning (Hz), Stark coefficient magnitude (Hz/(V/cm)),
    inversion-subgroup parity (+1 or -1), Bloch state and statistical weight."""

    detuning: float
    stark_coeff: float
    parity: int
    state: BlochVector = BlochVector(0.0, 0.0, -1.0)
    weight: float = 1.0

    def __post_init__(self):
        if self.stark_coeff < 0:
            raise ValidationError("stark_coeff must be >= 0; sign lives in parity")
        if self.parity not in (-1, 1):
            raise ValidationError("parity must be +1 or -1")
        if self.weight <= 0:
            raise ValidationError("weight must be > 0")

    @property
    def bloch_norm(self) -> float:
        u, v, w = self.state
        return math.sqrt(u * u + v * v + w * w)


@dataclass(frozen=True)
class RelaxationSpec:
    """Population (t1) and coherence (t2) lifetimes in seconds; inf disables."""

    t1: float = math.inf
    t2: float = math.inf

    def validate(self):
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValidationError("t1 and t2 must be positive")
        if math.isfinite(self.t1) and math.isfinite(self.t2) and self.t2 > 2.0 * self.t1:
            raise ValidationError("t2 must satisfy t2 <= 2*t1")


@dataclass(frozen=True)
class MonteCarlo:
    """Seeded iid sampling of both distributions."""

    seed: int


@dataclass(frozen=True)
class Quadrature:
    """Deterministic node placement.

    rule "midpoint" uses equal-probability bins for the Stark dimension
    (uniform weights, exact requested count).  rule "gauss" sizes the Stark
    nodes adaptively so discrete cosine sums track the analytic transform
    to ~2e-7 for field-time products up to x_max; the built center count is
    then accuracy-driven rather than n_centers-driven.  Detunings always sit
    at Gauss-type nodes of the line shape.

    stark_nodes fixes the midpoint Stark count when both dimensions are
    non-degenerate; line_nodes overrides the detuning count.
    """

    rule: str = "midpoint"
    stark_nodes: Optional[int] = None
    line_nodes: Optional[int] = None
    x_max: Optional[float] = None

    def validate(self):
        if self.rule not in ("midpoint", "gauss"):
            raise ValidationError(f"unknown quadrature rule {self.rule!r}")
        if self.rule == "gauss" and self.x_max is None:
            raise ValidationError("quadrature rule 'gauss' requires x_max")


Sampling = Union[MonteCarlo, Quadrature]


@dataclass(frozen=True)
class EnsembleSpec:
    line_shape: Distribution
    stark_shape: Distribution
    n_centers: int
    sampling: Sampling = field(default_factory=Quadrature)
    relaxation: RelaxationSpec = field(default_factory=RelaxationSpec)

    def validate(self):
        if self.n_centers < 2:
            raise ValidationError("n_centers must be >= 2")
        if self.n_centers % 2:
            raise ValidationError("n_centers must be even (half/half parity split)")
        self.line_shape.validate()
        self.stark_shape.validate()
        self.relaxation.validate()
        if isinstance(self.sampling, Quadrature):
            self.sampling.validate()


class Ensemble:
    """Vectorized container of centers; indexable as a sequence of Center.

    Arrays are one entry per center: detuning (Hz), stark (Hz/(V/cm), >= 0),
    parity (+1/-1), weight (sums to 1), coh = u + i*v, w.  State arrays are
    the mutable part; construction metadata is frozen in `spec`.
    """

    def __init__(self, detuning, stark, parity, weight, relaxation: RelaxationSpec,
                 spec: Optional[EnsembleSpec] = None):
        self.detuning = np.asarray(detuning, dtype=float)
        self.stark = np.asarray(stark, dtype=float)
        self.parity = np.asarray(parity, dtype=float)
        self.weight = np.asarray(weight, dtype=float)
        n = len(self.detuning)
        if not (len(self.stark) == len(self.parity) == len(self.weight) == n):
            raise ValidationError("ensemble arrays must share one length")
        self.relaxation = relaxation
        self.spec = spec
        self.coh = np.zeros(n, dtype=complex)
        self.w = np.full(n, -1.0)

    def __len__(self) -> int:
        return len(self.detuning)

    def __getitem__(self, i: int) -> Center:
        return Center(
            detuning=float(self.detuning[i]),
            stark_coeff=float(self.stark[i]),
            parity=int(self.parity[i]),
            state=BlochVector(float(self.coh[i].real), float(self.coh[i].imag), float(self.w[i])),
            weight=float(self.weight[i]),
        )

    def __iter__(self) -> Iterator[Center]:
        return (self[i] for i in range(len(self)))

    def copy(self) -> "Ensemble":
        dup = Ensemble(self.detuning.copy(), self.stark.copy(), self.parity.copy(),
                       self.weight.copy(), self.relaxation, self.spec)
        dup.coh = self.coh.copy()
        dup.w = self.w.copy()
        return dup

    def reset(self) -> None:
        """Return every center to the ground state (0, 0, -1)."""
        self.coh[:] = 0.0
        self.w[:] = -1.0

    def polarization(self) -> complex:
        """Weighted transverse sum, P = sum weight * (u + i v)."""
        return complex(np.dot(self.weight, self.coh))

    def mean_w(self) -> float:
        return float(np.dot(self.weight, self.w))


def _fold_negative(nodes: np.ndarray, parity_sign: float):
    """Map a node with k < 0 to (|k|, flipped parity): same physical shift."""
    parity = np.where(nodes < 0, -parity_sign, parity_sign)
    return np.abs(nodes), parity


def build_ensemble(spec: EnsembleSpec) -> Ensemble:
    """Construct the ensemble per the sampling mode.

    Monte Carlo draws n_centers/2 Stark coefficients (each coefficient is
    paired across both parities) and an independent detuning per center.
    Quadrature lays a detuning x Stark tensor grid per parity; weights are
    normalized to 1/2 per subgroup.
    """
    spec.validate()
    half = spec.n_centers // 2

    if isinstance(spec.sampling, MonteCarlo):
        rng = np.random.default_rng(spec.sampling.seed)
        ks = spec.stark_shape._sample(rng, half)
        det_pos = spec.line_shape._sample(rng, half)
        det_neg = spec.line_shape._sample(rng, half)
        k_pos, par_pos = _fold_negative(ks, 1.0)
        k_neg, par_neg = _fold_negative(ks, -1.0)
        detuning = np.concatenate([det_pos, det_neg])
        stark = np.concatenate([k_pos, k_neg])
        parity = np.concatenate([par_pos, par_neg])
        weight = np.full(spec.n_centers, 1.0 / spec.n_centers)
        return Ensemble(detuning, stark, parity, weight, spec.relaxation, spec)

    sampling: Quadrature = spec.sampling
    if sampling.rule == "gauss":
        k_nodes, k_weights = gauss_nodes(spec.stark_shape, sampling.x_max)
    else:
        n_stark = sampling.stark_nodes
        if n_stark is None:
            if isinstance(spec.stark_shape, Delta):
                n_stark = 1
            elif isinstance(spec.line_shape, Delta):
                n_stark = half
            else:
                raise ValidationError(
                    "stark_nodes is required when both line_shape and "
                    "stark_shape are continuous (midpoint rule)"
                )
        k_nodes, k_weights = midpoint_nodes(spec.stark_shape, n_stark)

    n_line = sampling.line_nodes
    if n_line is None:
        n_line = max(1, half // len(k_nodes))
    if isinstance(spec.line_shape, Delta):
        d_nodes, d_weights = np.array([spec.line_shape.k0]), np.array([1.0])
    else:
        d_nodes, d_weights = gauss_panel_nodes(spec.line_shape, n_line)

    if sampling.rule == "midpoint" and len(k_nodes) * len(d_nodes) != half:
        raise ValidationError(
            f"n_centers={spec.n_centers} does not factor as "
            f"2 * {len(d_nodes)} line nodes * {len(k_nodes)} stark nodes; "
            "adjust n_centers, stark_nodes, or line_nodes"
        )

    det_grid = np.repeat(d_nodes, len(k_nodes))
    k_grid = np.tile(k_nodes, len(d_nodes))
    w_grid = np.repeat(d_weights, len(k_nodes)) * np.tile(k_weights, len(d_nodes))
    w_grid = 0.5 * w_grid / w_grid.sum()  # 1/2 per parity subgroup

    k_pos, par_pos = _fold_negative(k_grid, 1.0)
    k_neg, par_neg = _fold_negative(k_grid, -1.0)
    detuning = np.concatenate([det_grid, det_grid])
    stark = np.concatenate([k_pos, k_neg])
    parity = np.concatenate([par_pos, par_neg])
    weight = np.concatenate([w_grid, w_grid])
    return Ensemble(detuning, stark, parity, weight, spec.relaxation, spec)


def ensemble_from_nodes(detunings, det_weights, stark_nodes, stark_weights,
                        relaxation: Optional[RelaxationSpec] = None) -> Ensemble:
    """Tensor-grid ensemble straight from explicit quadrature nodes."""
    detunings = np.asarray(detunings, dtype=float)
    det_weights = np.asarray(det_weights, dtype=float)
    stark_nodes = np.asarray(stark_nodes, dtype=float)
    stark_weights = np.asarray(stark_weights, dtype=float)
    det_grid = np.repeat(detunings, len(stark_nodes))
    k_grid = np.tile(stark_nodes, len(detunings))
    w_grid = np.repeat(det_weights, len(stark_nodes)) * np.tile(stark_weights, len(detunings))
    w_grid = 0.5 * w_grid / w_grid.sum()
    k_pos, par_pos = _fold_negative(k_grid, 1.0)
    k_neg, par_neg = _fold_negative(k_grid, -1.0)
    return Ensemble(
        np.concatenate([det_grid, det_grid]),
        np.concatenate([k_pos, k_neg]),
        np.concatenate([par_pos, par_neg]),
        np.concatenate([w_grid, w_grid]),
        relaxation or RelaxationSpec(),
    )
