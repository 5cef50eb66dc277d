import numpy as np
import pytest

from attdetengine.detectors.linear import (
    MmseDetector,
    ZeroForcingDetector,
    detect_mf,
    detect_mmse,
    detect_zf,
    mmse_filter,
)
from attdetengine.exceptions import DegenerateColumn, DimensionMismatch, RankDeficient
from attdetengine.modem.constellation import build_constellation


def test_zf_noiseless_recovers_bits(scenario):
    """Verifica se o ZF sem ruído recupera todos os bits transmitidos."""
    s = scenario(8, 2, 16, 200)
    result = detect_zf(s.h, s.y, s.c)
    np.testing.assert_array_equal(result.hard_bits, s.bits)
    np.testing.assert_allclose(result.hard_symbols, s.x, atol=1e-12)
    assert result.detector_name == "zf"


def test_zf_rank_deficient():
    """Verifica se um canal com colunas iguais levanta RankDeficient."""
    h = np.ones((4, 2), dtype=np.complex128)
    with pytest.raises(RankDeficient):
        detect_zf(h, np.ones(4), build_constellation(4))


def test_zf_llr_sign_matches_bits(scenario):
    """Verifica se o sinal das LLRs do ZF coincide com seus bits decididos."""
    s = scenario(4, 2, 16, 300, snr_db=10.0, seed=1)
    result = detect_zf(s.h, s.y, s.c, s.noise_var)
    assert np.all((result.llrs > 0) == (result.hard_bits == 1))


def test_single_re_has_no_batch_axis(scenario):
    """Verifica se a entrada de um único RE devolve resultados sem eixo de lote."""
    s = scenario(4, 2, 4, 1)
    result = detect_zf(s.h[0], s.y[0], s.c)
    assert result.llrs.shape == (2, 2)
    assert result.hard_symbols.shape == (2,)


def test_mmse_filter_identity_channel():
    """Verifica o filtro MMSE para o canal identidade: W = I / (1 + σ²)."""
    np.testing.assert_allclose(mmse_filter(np.eye(3), 0.5), np.eye(3) / 1.5, atol=1e-12)


def test_mmse_noiseless_limit(scenario):
    """Verifica se o MMSE com σ² ínfimo decide como o ZF sem ruído."""
    s = scenario(8, 2, 64, 200)
    result = detect_mmse(s.h, s.y, 1e-10, s.c)
    np.testing.assert_array_equal(result.hard_bits, s.bits)


def test_mmse_requires_positive_noise(scenario):
    """Verifica se σ² = 0 é rejeitado pelo MMSE."""
    s = scenario(4, 2, 4, 2)
    with pytest.raises(ValueError, match="noise_var"):
        detect_mmse(s.h, s.y, 0.0, s.c)


def test_mmse_bias_on_identity_channel():
    """Verifica se o MMSE corrige o viés 1 / (1 + σ²) no canal identidade."""
    c = build_constellation(16)
    x = c.points[[3, 9]]
    result = detect_mmse(np.eye(2), x, 0.25, c)
    np.testing.assert_allclose(result.hard_symbols, x, atol=1e-12)


def test_mmse_ideal_uses_true_channel(scenario):
    """Verifica se mmse_ideal ignora a estimativa e usa o canal verdadeiro."""
    s = scenario(8, 2, 16, 100)
    wrong = s.h + 0.7
    result = MmseDetector(ideal_csi=True).detect(wrong, s.y, 1e-9, s.c, h_true=s.h)
    np.testing.assert_array_equal(result.hard_bits, s.bits)
    assert result.detector_name == "mmse_ideal"


def test_mmse_ideal_without_true_channel(scenario):
    """Verifica se mmse_ideal sem o canal verdadeiro levanta DimensionMismatch."""
    s = scenario(4, 2, 4, 2)
    with pytest.raises(DimensionMismatch):
        MmseDetector(ideal_csi=True).detect(s.h, s.y, 0.1, s.c)


def test_mmse_fewer_errors_than_zf(scenario):
    """Verifica se, nos mesmos REs de um canal 2x2, o MMSE erra menos bits que o ZF."""
    s = scenario(2, 2, 16, 4000, snr_db=12.0, seed=2)
    zf_errors = np.sum(ZeroForcingDetector().detect(s.h, s.y, s.noise_var, s.c).hard_bits != s.bits)
    mmse_errors = np.sum(MmseDetector().detect(s.h, s.y, s.noise_var, s.c).hard_bits != s.bits)
    assert mmse_errors <= zf_errors


def test_mf_equals_zf_on_orthogonal_channel():
    """Verifica se o filtro casado coincide com o ZF quando as colunas são ortogonais."""
    c = build_constellation(16)
    h = np.eye(4, 2) * np.array([1.5, 0.7])
    y = h @ c.points[[1, 14]] + 0.05
    np.testing.assert_array_equal(detect_mf(h, y, 0.1, c).hard_bits, detect_zf(h, y, c, 0.1).hard_bits)


def test_mf_degenerate_column():
    """Verifica se uma coluna nula levanta DegenerateColumn."""
    h = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DegenerateColumn):
        detect_mf(h, np.ones(2), 0.1, build_constellation(4))
