import numpy as np
import pytest

from pulselab.system import (NoiseConfig, SectorDecompositionUnavailable,
                             SystemParams, TWO_PI, basis_index, build_control,
                             build_drift, build_ladder, excitation_sectors,
                             number_operator)


def test_ladder_qubit_case():
    lower, raiser = build_ladder(2)
    assert np.array_equal(lower, np.array([[0, 1], [0, 0]], dtype=complex))
    assert np.array_equal(raiser, lower.conj().T)


def test_ladder_qutrit_entry():
    lower, _ = build_ladder(3)
    assert lower[1, 2] == pytest.approx(np.sqrt(2))
    assert lower[0, 1] == pytest.approx(1.0)


def test_ladder_number_operator():
    lower, raiser = build_ladder(3)
    num = raiser @ lower
    assert np.allclose(np.diag(num), [0, 1, 2])
    assert np.allclose(num - np.diag(np.diag(num)), 0)


def test_ladder_rejects_small():
    with pytest.raises(ValueError):
        build_ladder(1)


def test_params_defaults_match_reference_table():
    p = SystemParams()
    assert (p.omega1, p.omega2, p.omegac) == (5.8899, 5.0311, 7.445)
    assert (p.alpha1, p.alpha2, p.alphac) == (0.324, 0.235, 0.230)
    assert (p.g1, p.g2) == (0.100, 0.0714)
    assert p.omega_r == 6.0
    assert p.levels == 3


def test_params_validation():
    with pytest.raises(ValueError):
        SystemParams(levels=2)
    with pytest.raises(ValueError):
        SystemParams(omega1=float("nan"))


def test_drift_hermitian(table1_params):
    h0 = build_drift(table1_params)
    assert np.abs(h0 - h0.conj().T).max() <= 1e-12


def test_drift_vacuum_energy_zero(table1_params):
    h0 = build_drift(table1_params)
    assert h0[0, 0] == 0.0


def test_drift_010_diagonal_with_couplings_off():
    p = SystemParams(g1=0.0, g2=0.0)
    h0 = build_drift(p)
    idx = basis_index((0, 1, 0), 3)
    expected = TWO_PI * (5.0311 - 6.0)
    assert h0[idx, idx].real == pytest.approx(expected, abs=1e-12)
    assert h0[idx, idx].real == pytest.approx(-TWO_PI * 0.9689, abs=1e-12)


def test_drift_commutes_with_number_operator(table1_params):
    h0 = build_drift(table1_params)
    nop = number_operator(3)
    assert np.abs(h0 @ nop - nop @ h0).max() <= 1e-12


def test_control_is_coupler_number(table1_params):
    h1 = build_control(table1_params)
    assert h1[basis_index((0, 0, 1), 3), basis_index((0, 0, 1), 3)] == 1.0
    assert h1[basis_index((0, 1, 0), 3), basis_index((0, 1, 0), 3)] == 0.0
    assert np.abs(h1 - np.diag(np.diag(h1))).max() == 0.0
    nop = number_operator(3)
    assert np.abs(h1 @ nop - nop @ h1).max() == 0.0


def test_sector_bases_l3(table1_params):
    h0 = build_drift(table1_params)
    h1 = build_control(table1_params)
    sectors = excitation_sectors(h0, h1, 2, 3)
    assert [s.dim for s in sectors] == [1, 3, 6]
    assert sectors[0].h0_block[0, 0] == 0.0
    expect_n1 = [basis_index(o, 3) for o in ((0, 0, 1), (0, 1, 0), (1, 0, 0))]
    assert sectors[1].basis_indices.tolist() == expect_n1
    expect_n2 = [basis_index(o, 3) for o in
                 ((0, 0, 2), (0, 1, 1), (0, 2, 0),
                  (1, 0, 1), (1, 1, 0), (2, 0, 0))]
    assert sectors[2].basis_indices.tolist() == expect_n2


def test_sector_blocks_restrict_full_operators(table1_params):
    h0 = build_drift(table1_params)
    h1 = build_control(table1_params)
    sec = excitation_sectors(h0, h1, 2, 3)[2]
    idx = sec.basis_indices
    assert np.array_equal(sec.h0_block, h0[np.ix_(idx, idx)])
    assert np.array_equal(sec.h1_block, h1[np.ix_(idx, idx)])


def test_sector_decomposition_unavailable_for_nonconserving():
    p = SystemParams()
    h0 = build_drift(p)
    h1 = build_control(p)
    bad = h0.copy()
    bad[0, 1] = bad[1, 0] = 1.0  # number-violating element
    with pytest.raises(SectorDecompositionUnavailable):
        excitation_sectors(bad, h1, 2, 3)


def test_noise_config_rate():
    noise = NoiseConfig(t1=100.0)
    assert noise.rate_per_ns == pytest.approx(1e-5)
    with pytest.raises(ValueError):
        NoiseConfig(t1=0.0)


@pytest.mark.parametrize("levels", [3, 4, 5])
def test_number_conservation_all_levels(levels):
    p = SystemParams(levels=levels)
    h0 = build_drift(p)
    h1 = build_control(p)
    nop = number_operator(levels)
    for u in (0.0, 1.0, -2.5):
        h = h0 + TWO_PI * u * h1
        assert np.abs(h @ nop - nop @ h).max() <= 1e-12
