import numpy as np
import pytest

from symrec.spectral_core import JapaneseBracketWeight, inner_product_sobolev
from symrec.wave_packets import (
    WavePacketFamily,
    bridge_sigma,
    lattice_spacing_for,
    make_packet,
    packet_overlap_decay,
)


def test_bridge_plateaus(profile):
    assert profile.chi_hat(np.array([0.4]))[0] == profile.b
    assert profile.chi_hat(np.array([0.0]))[0] == profile.b
    assert profile.chi_hat(np.array([1.1]))[0] == 0.0
    assert profile.chi_hat(np.array([-1.1]))[0] == 0.0


def test_normalization_against_fine_quadrature(profile):
    # independent oracle: Simpson on a dense grid of the bridge
    r = np.linspace(0.0, 1.0, 200_001)
    vals = bridge_sigma(r, profile.sharpness) ** 2
    integral = 2.0 * np.trapezoid(vals, r)
    b_oracle = 1.0 / np.sqrt(integral)
    assert abs(profile.b - b_oracle) < 1e-8
    # norm of chi_hat equals one
    xi = np.linspace(-1.0, 1.0, 400_001)
    norm_sq = np.trapezoid(profile.chi_hat(xi) ** 2, xi)
    assert abs(norm_sq - 1.0) < 1e-8


def test_window_geometry(profile):
    family = WavePacketFamily(x0=0.0, xi0=1.0, lam=2.0, profile=profile)
    p = make_packet(family, 10.0)
    assert p.window.center == 100.0
    assert p.window.half_width == 10.0


def test_packet_scale_below_one_rejected(family):
    with pytest.raises(ValueError, match="t must be >= 1"):
        make_packet(family, 0.99)


def test_family_validation(profile):
    with pytest.raises(ValueError, match="unit direction"):
        WavePacketFamily(0.0, 0.5, 2.0, profile)
    with pytest.raises(ValueError, match="lambda"):
        WavePacketFamily(0.0, 1.0, 1.0, profile)


def test_spectral_support_containment(family):
    spacing = lattice_spacing_for([4.0])
    p = make_packet(family, 4.0, lattice_spacing=spacing)
    xi = p.window.grid()
    outside = np.abs(xi - family.center(4.0)) >= 4.0
    assert np.all(p.values[outside] == 0.0)


def test_sobolev_norm_slopes(profile):
    # log||f_t||_beta vs log t has slope lam*beta
    for beta, lam, expected in [(0.5, 2.0, 1.0), (-0.5, 2.5, -1.25)]:
        family = WavePacketFamily(x0=0.0, xi0=1.0, lam=lam, profile=profile)
        w = JapaneseBracketWeight(beta)
        ts = np.array([4.0, 8.0, 16.0, 32.0])
        norms = [
            np.sqrt(inner_product_sobolev(make_packet(family, t), make_packet(family, t), w).real)
            for t in ts
        ]
        slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
        assert abs(slope - expected) < 0.05


def test_reflected_windows_disjoint(profile, rng):
    # window of f_t and the reflected window of f_s never intersect
    for _ in range(50):
        lam = rng.uniform(1.1, 3.0)
        t = rng.uniform(1.0, 40.0)
        s = rng.uniform(1.0, 40.0)
        lo_t, hi_t = t ** lam - t, t ** lam + t
        refl_lo, refl_hi = -(s ** lam) - s, -(s ** lam) + s
        assert refl_hi <= lo_t + 1e-12


def test_overlap_decay_table(profile):
    family = WavePacketFamily(x0=0.0, xi0=1.0, lam=2.0, profile=profile)
    T = 8.0
    table = packet_overlap_decay(family, T, grid_points=9)
    diag = np.diag(table.overlaps)
    np.testing.assert_allclose(diag, 1.0, atol=1e-6)

    # envelope really bounds the table
    bound = table.envelope_constant / (1.0 + table.separations / T)
    assert np.all(table.overlaps <= bound + 1e-12)

    # pairs separated by |t^lam - s^lam| = 4T sit below C/5
    far = np.abs(table.separations - 4 * T) < 0.5 * T
    assert np.any(far)
    assert np.all(table.overlaps[far] <= table.envelope_constant / 5.0 + 1e-9)

    # lower bound on the near-diagonal set D = {|t^lam - s^lam| <= T/4}
    near = table.separations <= T / 4.0
    lower = profile.b ** 2 * 2.0 ** -0.5 * 0.5
    assert table.overlaps[near].min() >= lower

    # one off-diagonal entry against direct physical-space quadrature
    from test_spectral_core import brute_force_overlap

    i, j = 0, 1
    oracle = abs(
        brute_force_overlap(family, table.t_values[i], table.s_values[j])
    )
    assert abs(table.overlaps[i, j] - oracle) < 1e-6


def test_overlap_decay_requires_large_T(profile):
    family = WavePacketFamily(x0=0.0, xi0=1.0, lam=1.5, profile=profile)
    with pytest.raises(ValueError, match="2\\^"):
        packet_overlap_decay(family, 2.0)
