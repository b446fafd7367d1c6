import math
from collections import Counter

import numpy as np
import pytest

from semm.distributions import Delta, Gaussian, Lorentzian, Uniform
from semm.ensemble import (BlochVector, Center, EnsembleSpec, MonteCarlo,
                           Quadrature, RelaxationSpec, build_ensemble,
                           ensemble_from_nodes)
from semm.errors import ValidationError


def spec(line=None, stark=None, n=256, sampling=None, relax=None):
    return EnsembleSpec(
        line_shape=line or Gaussian.from_fwhm(0.0, 32e3),
        stark_shape=stark or Delta(0.43),
        n_centers=n,
        sampling=sampling or Quadrature(),
        relaxation=relax or RelaxationSpec(),
    )


def test_two_center_delta_ensemble():
    ens = build_ensemble(spec(line=Delta(0.0), stark=Delta(0.43), n=2))
    assert len(ens) == 2
    assert sorted(c.parity for c in ens) == [-1, 1]
    for c in ens:
        assert c.detuning == 0.0
        assert c.stark_coeff == 0.43
        assert c.state == BlochVector(0.0, 0.0, -1.0)


def test_monte_carlo_reproducible():
    s = spec(sampling=MonteCarlo(seed=7), stark=Gaussian(0.43, 0.05), n=512)
    a, b = build_ensemble(s), build_ensemble(s)
    np.testing.assert_array_equal(a.detuning, b.detuning)
    np.testing.assert_array_equal(a.stark, b.stark)
    np.testing.assert_array_equal(a.parity, b.parity)
    np.testing.assert_array_equal(a.weight, b.weight)


def test_quadrature_abs_detuning_mean():
    # half-normal mean sigma*sqrt(2/pi) for a centered Gaussian line
    fwhm = 32e3
    sigma = fwhm / (2 * math.sqrt(2 * math.log(2)))
    ens = build_ensemble(spec(n=1000))
    mean_abs = np.dot(ens.weight, np.abs(ens.detuning))
    expected = sigma * math.sqrt(2 / math.pi)
    assert mean_abs == pytest.approx(expected, rel=0.005)


def test_parity_pairing_montecarlo_with_folding():
    # heavy-tailed stark law samples negative values that fold onto the
    # opposite parity; the (k, parity) multiset must still pair exactly
    s = spec(stark=Lorentzian(0.2, 0.5), sampling=MonteCarlo(seed=12), n=2000)
    ens = build_ensemble(s)
    assert np.all(ens.stark >= 0)
    pos = Counter(round(c.stark_coeff, 12) for c in ens if c.parity == 1)
    neg = Counter(round(c.stark_coeff, 12) for c in ens if c.parity == -1)
    assert pos == neg
    assert sum(ens.parity) == 0


def test_quadrature_subgroup_weight():
    ens = build_ensemble(spec(n=512))
    wpos = ens.weight[ens.parity > 0].sum()
    wneg = ens.weight[ens.parity < 0].sum()
    assert wpos == pytest.approx(0.5, abs=1e-12)
    assert wneg == pytest.approx(0.5, abs=1e-12)


def test_monte_carlo_independence():
    s = spec(stark=Gaussian(0.43, 0.05), sampling=MonteCarlo(seed=31), n=10_000)
    ens = build_ensemble(s)
    corr = np.corrcoef(ens.detuning, ens.stark)[0, 1]
    assert abs(corr) < 0.05


def test_midpoint_both_dimensions():
    s = spec(stark=Gaussian(0.43, 0.05), n=2 * 16 * 8,
             sampling=Quadrature(stark_nodes=8))
    ens = build_ensemble(s)
    assert len(ens) == 2 * 16 * 8
    assert ens.weight.sum() == pytest.approx(1.0, abs=1e-12)


def test_midpoint_needs_factorization():
    s = spec(stark=Gaussian(0.43, 0.05), n=100, sampling=Quadrature(stark_nodes=7))
    with pytest.raises(ValidationError, match="factor"):
        build_ensemble(s)


def test_midpoint_requires_stark_nodes_when_continuous():
    s = spec(stark=Gaussian(0.43, 0.05), n=100)
    with pytest.raises(ValidationError, match="stark_nodes"):
        build_ensemble(s)


def test_gauss_rule_requires_x_max():
    with pytest.raises(ValidationError, match="x_max"):
        spec(sampling=Quadrature(rule="gauss")).validate()


def test_gauss_rule_builds_accuracy_driven():
    s = spec(stark=Gaussian(0.43, 0.05), n=8,
             sampling=Quadrature(rule="gauss", x_max=1.3, line_nodes=4))
    ens = build_ensemble(s)
    assert len(ens) > 8  # node count follows accuracy, not n_centers
    assert ens.weight.sum() == pytest.approx(1.0, abs=1e-12)


def test_odd_n_centers_rejected():
    with pytest.raises(ValidationError, match="n_centers"):
        spec(n=3).validate()


def test_small_n_centers_rejected():
    with pytest.raises(ValidationError, match="n_centers"):
        spec(n=0).validate()


def test_relaxation_validation():
    with pytest.raises(ValidationError):
        RelaxationSpec(t1=1.0, t2=3.0).validate()   # t2 > 2 t1
    with pytest.raises(ValidationError):
        RelaxationSpec(t1=-1.0).validate()
    RelaxationSpec(t1=1.0, t2=2.0).validate()
    RelaxationSpec().validate()


def test_center_invariants():
    with pytest.raises(ValidationError):
        Center(0.0, -0.1, 1)
    with pytest.raises(ValidationError):
        Center(0.0, 0.1, 0)
    with pytest.raises(ValidationError):
        Center(0.0, 0.1, 1, weight=0.0)


def test_initial_state_ground():
    ens = build_ensemble(spec(n=64))
    assert np.all(ens.w == -1.0)
    assert np.all(ens.coh == 0.0)
    for c in ens:
        assert c.bloch_norm == pytest.approx(1.0, abs=1e-12)


def test_ensemble_copy_isolated():
    ens = build_ensemble(spec(n=64))
    dup = ens.copy()
    dup.coh[:] = 1.0
    assert np.all(ens.coh == 0.0)


def test_ensemble_from_nodes_tensor():
    ens = ensemble_from_nodes([0.0, 100.0], [0.5, 0.5], [0.4, 0.5, 0.6],
                              [0.2, 0.5, 0.3])
    assert len(ens) == 2 * 2 * 3
    assert ens.weight.sum() == pytest.approx(1.0, abs=1e-12)
    assert ens.weight[ens.parity > 0].sum() == pytest.approx(0.5, abs=1e-12)


def test_polarization_initially_zero():
    ens = build_ensemble(spec(n=64))
    assert ens.polarization() == 0.0
    assert ens.mean_w() == pytest.approx(-1.0, abs=1e-12)
