import numpy as np
import pytest

from statphase.tfanalysis import GradientField, TFField, analyze_derivatives, gradient_fields
from statphase.tfspa import (RegionMask, build_region_mask, disk_ratio, dominance_1d, dominance_mask,
                             integrand_patch, stationary_points, validate_dominance_patch)


def field(phi, amp, defined=None):
    phi = np.asarray(phi, dtype=float)
    amp = np.asarray(amp, dtype=float)
    from statphase.tfanalysis import projection
    d = np.ones(phi.shape[1:], bool) if defined is None else defined
    return GradientField(phi, amp, projection(phi, amp), d)


@pytest.fixture(scope="module")
def impulse_grads(chirp_bank):
    x = np.zeros(3000)
    x[200] = 1.0
    F = analyze_derivatives(x, chirp_bank)
    return F, gradient_fields(F, chirp_bank)


def test_zero_gradient_field_all_stationary():
    g = field(np.zeros((2, 4, 5)), np.ones((2, 4, 5)))
    assert stationary_points(g).all()


def test_stationary_threshold_and_norms():
    phi = np.array([[[6.0, 9.0]], [[8.0, 0.5]]])  # norms 10 and ~9.01
    g = field(phi, np.ones((2, 1, 2)))
    assert stationary_points(g, 10.0).tolist() == [[False, True]]
    # L1 norms are 14 and 9.5
    assert stationary_points(g, 10.0, ord=1).tolist() == [[False, True]]
    assert stationary_points(g, 14.5, ord=1).tolist() == [[True, True]]


def test_invalid_thresholds():
    g = field(np.zeros((2, 2, 2)), np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        stationary_points(g, 0.0)
    with pytest.raises(ValueError):
        dominance_mask(g, 0.99)
    with pytest.raises(ValueError):
        RegionMask(np.ones((2, 2)), np.zeros((2, 2)), C2=0.5)


def test_zero_amplitude_rate_not_dominant():
    g = field(np.array([[[50.0]], [[0.0]]]), np.zeros((2, 1, 1)))
    assert not dominance_mask(g).any()


def test_undefined_cells_dropped():
    d = np.array([[True, False]])
    g = field(np.zeros((2, 1, 2)), np.ones((2, 1, 2)), d)
    assert stationary_points(g).tolist() == [[True, False]]
    m = build_region_mask(g)
    assert m.keep.tolist() == [[True, False]]


def test_all_dominant_no_stationary_gives_empty_mask():
    phi = np.zeros((2, 6, 8))
    phi[0] = 100.0
    amp = np.zeros((2, 6, 8))
    amp[0] = 1.0
    g = field(phi, amp)
    m = build_region_mask(g, C1=10, C2=1)
    assert not m.keep.any()
    assert m.sparsity == 1.0


def test_dilation_radius():
    phi = np.zeros((2, 9, 9))
    phi[0] = 100.0
    phi[0, 4, 4] = 0.0
    amp = np.zeros((2, 9, 9))
    amp[0] = 1.0
    g = field(phi, amp)
    for r in (0, 1, 2):
        m = build_region_mask(g, radius=r)
        assert m.keep.sum() == (2 * r + 1) ** 2
        assert m.stationary.sum() == 1
        assert not np.any(m.stationary & ~m.keep)
    with pytest.raises(ValueError):
        build_region_mask(g, radius=-1)


def test_impulse_stationary_contour(chirp_bank, impulse_grads):
    _, g = impulse_grads
    st = stationary_points(g)
    fs = chirp_bank.sample_rate
    hits = 0
    rows = 0
    for k in range(len(chirp_bank)):
        idx = np.flatnonzero(st[k])
        if idx.size == 0:
            continue
        rows += 1
        best = idx[np.argmin(g.phi_norm()[k, idx])]
        hits += abs(best - (200 + chirp_bank.group_delays[k] * fs)) <= 1
    assert rows > 0.8 * len(chirp_bank)
    assert hits >= 0.9 * rows


def test_impulse_leading_edge_discarded(chirp_bank, impulse_grads):
    _, g = impulse_grads
    m = build_region_mask(g)
    dom = dominance_mask(g)
    fs = chirp_bank.sample_rate
    for k in (30, 60, 90):
        bt = (np.arange(g.shape[1]) - 200) / fs * chirp_bank[k].beta
        lead = (bt > 0.3) & (bt < 2.5)
        assert lead.sum() > 10
        assert dom[k, lead].all()
        assert not m.keep[k, lead].any()


def _impulse_dominance(c, bt):
    from statphase.filterbank import PrototypeFilter
    from statphase.signals import FilterParams, impulse_rates, rates_to_p_a
    p = FilterParams(PrototypeFilter.gammachirp(4, c), 712.0, 1 / 9, 35 * 712.0)
    pp, na = rates_to_p_a(*impulse_rates(p, bt / p.beta))
    return pp > na


def test_gammachirp_non_dominant_window_around_peak():
    bt = np.linspace(0.05, 30, 3000)
    widths = []
    for c in (4.0, 5.0, 9.0):
        dom = _impulse_dominance(c, bt)
        # onset is dominant, the envelope peak (bt = n - 1) is not
        assert dom[bt < 3.0].all()
        assert not dom[np.argmin(np.abs(bt - 4.0))]
        widths.append((~dom).sum())
    # a stronger chirp leaves less of the response non-dominant
    assert widths[0] > widths[1] > widths[2]


def test_phasor_dominant_outside_bandwidth():
    from statphase.filterbank import PrototypeFilter
    from statphase.signals import FilterParams, phasor_rates, rates_to_p_a
    p = FilterParams(PrototypeFilter.gammatone(4), 712.0, 1 / 9, 25 * 712.0)
    W = np.concatenate([np.linspace(-10, -0.5, 200), np.linspace(0.5, 10, 200)])
    pp, na = rates_to_p_a(*phasor_rates(p, W))
    assert np.all(pp > na)


def test_scaling_invariance(chirp_bank, rng):
    x = rng.standard_normal(2500)
    x[:300] = 0
    m0 = build_region_mask(gradient_fields(analyze_derivatives(x, chirp_bank), chirp_bank))
    # powers of two and j scale every product exactly
    for alpha in (4.0, -0.125, 1j):
        F = analyze_derivatives(alpha * x, chirp_bank)
        m = build_region_mask(gradient_fields(F, chirp_bank))
        assert np.array_equal(m.keep, m0.keep)
        assert np.array_equal(m.stationary, m0.stationary)


def test_scaling_invariance_generic_alpha(chirp_bank, rng):
    x = rng.standard_normal(2500)
    g0 = gradient_fields(analyze_derivatives(x, chirp_bank), chirp_bank)
    g1 = gradient_fields(analyze_derivatives(-3.7 * x, chirp_bank), chirp_bank)
    s0, s1 = stationary_points(g0), stationary_points(g1)
    d0, d1 = dominance_mask(g0), dominance_mask(g1)
    # any flip must sit on a threshold to within roundoff
    flip = s0 != s1
    assert np.all(np.abs(g0.phi_norm()[flip] - 10.0) < 1e-6 * 10)
    flip = d0 != d1
    assert np.all(np.abs(g0.dominance_ratio[flip] - 1.0) < 1e-6)
    assert (s0 != s1).mean() + (d0 != d1).mean() < 1e-4


def test_monotone_in_thresholds(chirp_bank, impulse_grads):
    _, g = impulse_grads
    prev = None
    for C1 in (1.0, 10.0, 100.0):
        s = stationary_points(g, C1)
        if prev is not None:
            assert np.all(prev <= s)
        prev = s
    prev = None
    for C2 in (1.0, 2.0, 10.0):
        keep_dom = ~dominance_mask(g, C2) & g.defined
        if prev is not None:
            assert np.all(prev <= keep_dom)
        prev = keep_dom


def test_mask_csv_and_pbm_round_trip(tmp_path, rng):
    keep = rng.random((5, 7)) > 0.5
    stat = keep & (rng.random((5, 7)) > 0.5)
    m = RegionMask(keep, stat, 12.5, 2.0, 3)
    m.to_csv(tmp_path / "m.csv")
    back = RegionMask.from_csv(tmp_path / "m.csv")
    assert np.array_equal(back.keep, keep) and np.array_equal(back.stationary, stat)
    assert (back.C1, back.C2, back.radius) == (12.5, 2.0, 3)
    m.to_pbm(tmp_path / "m.pbm")
    lines = (tmp_path / "m.pbm").read_text().splitlines()
    assert lines[0] == "P1" and lines[2] == "7 5"
    rows = np.array([[int(v) for v in ln.split()] for ln in lines[3:]])
    assert np.array_equal(rows[::-1].astype(bool), keep)
    rep = m.report()
    assert rep["kept_cells"] == keep.sum() and rep["stationary_cells"] == stat.sum()


def test_mask_csv_rejects_bad_codes(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0,1,3\n1,1,1\n")
    with pytest.raises(ValueError):
        RegionMask.from_csv(p)
    p.write_text("0,1,x\n")
    with pytest.raises(ValueError):
        RegionMask.from_csv(p)


# one-dimensional dominance


def test_dominance_1d_linear_phase():
    t = np.linspace(0, 1, 200)
    r = dominance_1d(np.ones_like(t), 30 * t, t[1] - t[0])
    assert r.first.all()


def test_dominance_1d_constant_phase():
    t = np.linspace(-3, 3, 200)
    r = dominance_1d(np.exp(-t * t / 2), np.zeros_like(t), t[1] - t[0])
    assert not r.first.any() and not r.second.any()


def test_dominance_1d_chirp():
    # b = gamma t^2 / 2, a = 1: first order dominant where |gamma t| > C2 eps
    gamma, eps, C2 = 50.0, 2.0, 1.5
    t = np.linspace(-1, 1, 2001)
    r = dominance_1d(np.ones_like(t), 0.5 * gamma * t * t, t[1] - t[0], C2=C2, eps=eps)
    expect = np.abs(gamma * t) > C2 * eps
    edge = np.abs(np.abs(gamma * t) - C2 * eps) < 0.1
    assert np.array_equal(r.first[~edge], expect[~edge])
    # |b''| = gamma beats C2 * eps, so second order follows first order
    assert np.array_equal(r.second, r.first)


def test_dominance_1d_errors():
    with pytest.raises(ValueError):
        dominance_1d([1.0, 1.0], [0.0, 1.0], 0.1)
    with pytest.raises(ValueError):
        dominance_1d([1.0, 1.0, 1.0], [0.0, 1.0], 0.1)
    with pytest.raises(ValueError):
        dominance_1d([1.0, 0.0, 1.0], [0.0, 1.0, 2.0], 0.1)


# patch integration


def test_disk_ratio_constant_patch():
    f = np.full((7, 7), 2.0 - 1.0j)
    assert disk_ratio(f, 2.0) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        disk_ratio(np.ones((3, 3)), 2.0)


@pytest.mark.parametrize("rate", [2.0, 3.0, 5.0])
def test_disk_ratio_linear_phase(rate):
    # closed form: |sum_S e^{j rate i}| / |S| over the disk's lattice points
    i, j = np.mgrid[-3:4, -3:4]
    f = np.exp(1j * rate * j)
    disk = i * i + j * j <= 9
    ref = abs(np.exp(1j * rate * j[disk]).sum()) / disk.sum()
    assert disk_ratio(f, 3.0) == pytest.approx(ref, rel=1e-12)
    assert disk_ratio(f, 3.0) < 0.5


def test_integrand_patch_centre_is_matched_filter(chirp_bank, impulse_grads):
    F, _ = impulse_grads
    k0, n0 = 50, 400
    P = integrand_patch(F.X, chirp_bank, k0, n0, 2.0)
    assert P.shape == (5, 5)
    ch = chirp_bank[k0]
    h = ch.beta * chirp_bank.prototype.h(ch.beta * ch.group_delay) * np.exp(1j * ch.omega * ch.group_delay)
    assert P[2, 2] == pytest.approx(F.X.data[k0, n0] * np.conj(h))
    with pytest.raises(ValueError):
        integrand_patch(F.X, chirp_bank, 0, n0, 2.0)


def test_dominant_cells_cancel_more(chirp_bank, impulse_grads, rng):
    F, g = impulse_grads
    dom = dominance_mask(g)
    mag = np.abs(F.X.data)
    ok = g.defined & (mag > 1e-3 * mag.max())
    ok[:3] = ok[-3:] = False
    ok[:, :3] = ok[:, -3:] = False
    cand = np.argwhere(ok)
    pick = cand[rng.choice(len(cand), 300, replace=False)]
    rep = validate_dominance_patch(F.X, chirp_bank, dom, pick, 2.0)
    assert rep.dominant.any() and (~rep.dominant).any()
    assert rep.median_dominant < rep.median_non_dominant
    with pytest.raises(ValueError):
        validate_dominance_patch(F.X, chirp_bank, dom[:, :10], pick)


def test_tone_mask_keeps_band_near_tone(chirp_bank):
    k = 49
    fs = chirp_bank.sample_rate
    N = 6000
    t = (np.arange(N) - 200) / fs
    x = np.where(t >= 0, np.cos(chirp_bank.omegas[k] * t), 0.0)
    g = gradient_fields(analyze_derivatives(x, chirp_bank), chirp_bank)
    m = build_region_mask(g)
    steady = slice(200 + 3 * chirp_bank.max_taps // 2, N - chirp_bank.max_taps)
    assert m.sparsity > 0.5
    assert m.keep[k, steady].all()
    rows = np.flatnonzero(m.stationary[:, steady].mean(axis=1) > 0.5)
    assert rows.tolist() == [k]


def test_region_mask_shape_checks():
    with pytest.raises(ValueError):
        RegionMask(np.ones((2, 3)), np.ones((3, 2)))
    assert TFField(np.zeros((1, 1)), 1.0).shape == (1, 1)
