import math

import numpy as np
import pytest

from semm.distributions import Delta, Gaussian, Uniform, gauss_nodes, gauss_panel_nodes
from semm.dynamics import free_evolve, rotate, run_sequence
from semm.ensemble import (BlochVector, Center, EnsembleSpec, Quadrature,
                           RelaxationSpec, build_ensemble, ensemble_from_nodes)
from semm.sequence import (Acquire, RfParams, Sequence, StarkPulse, make_semm,
                           parse_sequence, semm_times)

E_FIELD = 165.0
K0 = 0.43
X_QUARTER = 1.0 / (4.0 * K0)          # E*Ts at the quarter-cycle condition
TS_QUARTER = X_QUARTER / E_FIELD


def ground(detuning=0.0, k=K0, parity=1):
    return Center(detuning, k, parity)


def standard_ensemble(n=512, fwhm=32e3, stark=None, relax=None):
    return build_ensemble(EnsembleSpec(
        line_shape=Gaussian.from_fwhm(0.0, fwhm),
        stark_shape=stark or Delta(K0),
        n_centers=n,
        sampling=Quadrature(),
        relaxation=relax or RelaxationSpec(),
    ))


def sample_at(trace, t):
    idx = int(np.argmin(np.abs(trace.times - t)))
    return trace.values[idx]


# ------------------------------------------------------------- free_evolve


def test_free_evolve_identity():
    c = Center(0.0, 0.0, 1, BlochVector(0.3, 0.4, -0.2))
    out = free_evolve(c, 1e-3)
    assert out.state == pytest.approx(c.state)


def test_free_evolve_quarter_turn():
    # 2*pi * 100 Hz * 2.5 ms = pi/2
    c = Center(100.0, 0.0, 1, BlochVector(1.0, 0.0, 0.0))
    out = free_evolve(c, 2.5e-3)
    assert out.state.u == pytest.approx(0.0, abs=1e-12)
    assert out.state.v == pytest.approx(1.0, abs=1e-12)


def test_free_evolve_parity_opposite_shifts():
    dt = TS_QUARTER
    shift = K0 * E_FIELD
    plus = free_evolve(Center(0.0, K0, 1, BlochVector(1, 0, 0)), dt, extra_shift=shift)
    minus = free_evolve(Center(0.0, K0, -1, BlochVector(1, 0, 0)), dt, extra_shift=shift)
    # +pi/2 and -pi/2 phase: (1,0,0) -> (0,+-1,0)
    assert plus.state.v == pytest.approx(1.0, abs=1e-12)
    assert minus.state.v == pytest.approx(-1.0, abs=1e-12)


def test_free_evolve_relaxation():
    relax = RelaxationSpec(t1=1.0, t2=0.5)
    c = Center(0.0, 0.0, 1, BlochVector(1.0, 0.0, 0.0))
    out = free_evolve(c, 0.5, relaxation=relax)
    assert out.state.u == pytest.approx(math.exp(-1.0))
    assert out.state.w == pytest.approx(-1.0 + 1.0 * math.exp(-0.5))


def test_free_evolve_rejects_negative_dt():
    with pytest.raises(Exception):
        free_evolve(ground(), -1e-3)


# ------------------------------------------------------------------ rotate


def test_rotate_pi_conjugates_coherence():
    c = Center(0.0, 0.0, 1, BlochVector(0.0, 1.0, 0.0))
    out = rotate(c, math.pi, 0.0)
    assert out.state.v == pytest.approx(-1.0, abs=1e-12)
    assert out.state.u == pytest.approx(0.0, abs=1e-12)


def test_rotate_pi_inverts_population():
    out = rotate(ground(), math.pi, 0.0)
    assert out.state.w == pytest.approx(1.0, abs=1e-12)


def test_rotate_half_pi_phases():
    # phase phi sends ground to the equator at angle phi + pi/2
    for phi, target in [(0.0, (0.0, 1.0)), (math.pi / 2, (-1.0, 0.0)),
                        (math.pi, (0.0, -1.0)), (1.5 * math.pi, (1.0, 0.0))]:
        out = rotate(ground(), math.pi / 2, phi)
        assert out.state.u == pytest.approx(target[0], abs=1e-12)
        assert out.state.v == pytest.approx(target[1], abs=1e-12)
        assert out.state.w == pytest.approx(0.0, abs=1e-12)


def test_rotate_finite_imperfect_inversion():
    # generalized Rabi: at the line edge a nominal pi pulse fails to invert
    rabi = 20833.0
    out = rotate(Center(16e3, 0.0, 1), math.pi, 0.0, rabi=rabi)
    assert abs(out.state.w - 1.0) > 0.01


def test_rotate_finite_matches_ideal_on_resonance():
    out_f = rotate(ground(), math.pi / 3, 0.7, rabi=5e4)
    out_i = rotate(ground(), math.pi / 3, 0.7)
    for a, b in zip(out_f.state, out_i.state):
        assert a == pytest.approx(b, abs=1e-12)


def test_rotate_detuning_aware_flag():
    out = rotate(Center(16e3, 0.0, 1), math.pi, 0.0, rabi=20833.0,
                 detuning_aware=False)
    assert out.state.w == pytest.approx(1.0, abs=1e-12)


def test_rotate_preserves_norm():
    c = Center(7e3, 0.1, -1, BlochVector(0.2, -0.5, 0.6))
    for area, phase, rabi in [(1.1, 0.3, None), (2.5, 4.0, 3e4)]:
        out = rotate(c, area, phase, rabi=rabi)
        assert out.bloch_norm == pytest.approx(c.bloch_norm, abs=1e-12)


# ------------------------------------------------------------ run_sequence


def test_hahn_echo_amplitude():
    ens = standard_ensemble()
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, stark_duration=1e-3,
                    sample_rate=2e5)
    res = run_sequence(ens, seq)
    trace = res["echo1"]
    peak = np.abs(trace.values).max()
    assert peak == pytest.approx(1.0, abs=1e-9)
    assert trace.times[int(np.argmax(np.abs(trace.values)))] == pytest.approx(
        16e-3, abs=1.0 / seq.sample_rate)


def test_unitarity_with_infinite_lifetimes():
    ens = standard_ensemble(n=64)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD,
                    stark_duration=TS_QUARTER, sample_rate=2e5)
    res = run_sequence(ens, seq)
    norms = np.sqrt(np.abs(res.final.coh) ** 2 + res.final.w**2)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_quadrature_cancellation_at_quarter_condition():
    ens = standard_ensemble(n=4096)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD,
                    stark_duration=TS_QUARTER, sample_rate=2e5)
    res = run_sequence(ens, seq)
    assert abs(sample_at(res["echo1"], 16e-3)) < 1e-10


def test_recovery_identical_to_reference():
    ens = standard_ensemble(n=1024)
    base = dict(stark_duration=TS_QUARTER, sample_rate=2e5)
    on = run_sequence(ens, make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD, **base))
    off = run_sequence(ens, make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, **base))
    t7 = semm_times(0.0, 1e-3, 8e-3).t7
    assert abs(abs(sample_at(on["echo2"], t7)) - abs(sample_at(off["echo2"], t7))) < 1e-9


def test_parity_antisymmetry_under_sign_flip():
    ens = standard_ensemble(n=256)
    events = [
        RfParams(area=math.pi / 2).at(0.0),
        StarkPulse(start=1e-3, duration=2e-3, amplitude=E_FIELD, sign=1.0),
        Acquire(start=4e-3, duration=1e-3, label="probe"),
    ]
    seq_plus = Sequence(events=tuple(events), sample_rate=2e5)
    events[1] = StarkPulse(start=1e-3, duration=2e-3, amplitude=E_FIELD, sign=-1.0)
    seq_minus = Sequence(events=tuple(events), sample_rate=2e5)
    rp = run_sequence(ens, seq_plus, keep_parity=True)["probe"]
    rm = run_sequence(ens, seq_minus, keep_parity=True)["probe"]
    # flipping the global field swaps the roles of the parity subgroups
    np.testing.assert_allclose(rp.parity_pos, rm.parity_neg, atol=1e-12)
    np.testing.assert_allclose(rp.parity_neg, rm.parity_pos, atol=1e-12)
    np.testing.assert_allclose(np.abs(rp.values), np.abs(rm.values), atol=1e-12)


def test_parity_sums_add_to_total():
    ens = standard_ensemble(n=128)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD,
                    stark_duration=1e-3, sample_rate=2e5)
    res = run_sequence(ens, seq, keep_parity=True)
    tr = res["echo1"]
    np.testing.assert_allclose(tr.parity_pos + tr.parity_neg, tr.values, atol=1e-14)


@pytest.mark.parametrize("dist", [Gaussian(K0, 0.06), Uniform(0.23, 0.63)])
def test_cancellation_law_matches_transform(dist):
    kn, kw = gauss_nodes(dist, x_max=1.3)
    dn, dw = gauss_panel_nodes(Gaussian.from_fwhm(0.0, 32e3), 9)
    ens = ensemble_from_nodes(dn, dw, kn, kw)
    base = dict(sample_rate=2e5, echo_window=4e-5)
    t4 = semm_times(0.0, 0.5e-3, 8.5e-3).t4
    off = run_sequence(ens, make_semm(0.0, 0.5e-3, 8.5e-3, stark_amplitude=0.0,
                                      stark_duration=1e-9, **base))
    p0 = sample_at(off["echo1"], t4)
    for x in (0.15, 0.45, X_QUARTER, 0.9):
        seq = make_semm(0.0, 0.5e-3, 8.5e-3, stark_amplitude=E_FIELD,
                        stark_duration=x / E_FIELD, **base)
        ratio = (sample_at(run_sequence(ens, seq)["echo1"], t4) / p0).real
        assert ratio == pytest.approx(float(dist.ft_real(x)), abs=1e-6)


def test_sign_flipped_second_stark_leaves_transform_residual():
    dist = Gaussian(K0, 0.06)
    kn, kw = gauss_nodes(dist, x_max=1.3)
    ens = ensemble_from_nodes([0.0], [1.0], kn, kw)
    base = dict(stark_duration=TS_QUARTER, sample_rate=2e5)
    t7 = semm_times(0.0, 1e-3, 8e-3).t7
    off = run_sequence(ens, make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, **base))
    flip = run_sequence(ens, make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD,
                                       second_stark_sign=-1.0, **base))
    ratio = abs(sample_at(flip["echo2"], t7)) / abs(sample_at(off["echo2"], t7))
    assert ratio == pytest.approx(abs(float(dist.ft_real(2 * X_QUARTER))), abs=1e-6)
    assert ratio < 0.99


def test_stimulated_echo_scales_with_transform():
    # three half-pi pulses with one modulation pulse between the first two
    dist = Gaussian(K0, 0.05)
    kn, kw = gauss_nodes(dist, x_max=1.3)
    dn, dw = gauss_panel_nodes(Gaussian.from_fwhm(0.0, 32e3), 33)
    ens = ensemble_from_nodes(dn, dw, kn, kw)
    half = RfParams(area=math.pi / 2)
    t1, t2, t3, t6 = 0.0, 1e-3, 8e-3, 26e-3
    t_stim = t6 + (t3 - t1)
    x = 0.35

    def seq(amplitude):
        events = (half.at(t1),
                  StarkPulse(start=t2, duration=x / E_FIELD, amplitude=amplitude),
                  half.at(t3), half.at(t6),
                  Acquire(start=t_stim - 5e-5, duration=1e-4, label="stim"))
        return Sequence(events=events, sample_rate=2e5)

    r_on = run_sequence(ens, seq(E_FIELD))["stim"]
    r_off = run_sequence(ens, seq(0.0))["stim"]
    pk = int(np.argmax(np.abs(r_off.values)))
    assert abs(r_off.values[pk]) > 0.1
    ratio = (r_on.values[pk] / r_off.values[pk]).real
    assert ratio == pytest.approx(float(dist.ft_real(x)), abs=1e-6)


def test_t2_decay_of_echo():
    relax = RelaxationSpec(t2=20e-3)
    ens = standard_ensemble(n=128, relax=relax)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, stark_duration=1e-3,
                    sample_rate=2e5)
    res = run_sequence(ens, seq)
    peak = np.abs(res["echo1"].values).max()
    assert peak == pytest.approx(math.exp(-16e-3 / 20e-3), rel=1e-6)


def test_t1_relaxation_toward_ground():
    relax = RelaxationSpec(t1=10e-3, t2=15e-3)
    ens = standard_ensemble(n=16, relax=relax)
    seq = parse_sequence(
        "rf area=pi at=0\nwait at=1e-3 duration=1e-3\nacquire a from=10e-3 to=10.1e-3",
        sample_rate=1e5,
    )
    res = run_sequence(ens, seq)
    # inverted at t=0, pulled back toward w=-1 over 10.1 ms
    expected = -1.0 + 2.0 * math.exp(-10.1e-3 / 10e-3)
    assert res.final.mean_w() == pytest.approx(expected, rel=1e-9)


def test_input_linearity_small_area():
    # output echo amplitude scales as sin(area) of the excitation pulse
    ens = standard_ensemble(n=128)
    t7 = semm_times(0.0, 1e-3, 8e-3).t7
    amps = {}
    for area in (0.2, math.pi / 2):
        seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=E_FIELD,
                        stark_duration=TS_QUARTER, sample_rate=2e5,
                        input_pulse=RfParams(area=area))
        amps[area] = sample_at(run_sequence(ens, seq)["echo2"], t7)
    ratio = abs(amps[0.2]) / abs(amps[math.pi / 2])
    assert ratio == pytest.approx(math.sin(0.2), abs=1e-9)


def test_detection_noise_reproducible():
    ens = standard_ensemble(n=32)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, stark_duration=1e-3,
                    sample_rate=2e5)
    a = run_sequence(ens, seq, detection_noise=0.01, noise_seed=5)["echo1"].values
    b = run_sequence(ens, seq, detection_noise=0.01, noise_seed=5)["echo1"].values
    c = run_sequence(ens, seq, detection_noise=0.01, noise_seed=6)["echo1"].values
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)


def test_run_does_not_mutate_input():
    ens = standard_ensemble(n=32)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, stark_duration=1e-3,
                    sample_rate=2e5)
    run_sequence(ens, seq)
    assert np.all(ens.coh == 0.0)
    assert np.all(ens.w == -1.0)


def test_trace_grid_uniform():
    ens = standard_ensemble(n=16)
    seq = make_semm(0.0, 1e-3, 8e-3, stark_amplitude=0.0, stark_duration=1e-3,
                    sample_rate=2e5)
    tr = run_sequence(ens, seq)["echo1"]
    dt = np.diff(tr.times)
    np.testing.assert_allclose(dt, dt[0], rtol=1e-12)
    assert np.all(np.abs(tr.values) <= 1.0 + 1e-12)
