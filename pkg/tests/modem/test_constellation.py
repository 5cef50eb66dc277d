import numpy as np
import pytest

from attdetengine.exceptions import LengthMismatch, UnsupportedOrder
from attdetengine.modem.constellation import (
    SUPPORTED_ORDERS,
    build_constellation,
    hard_demap,
    map_bits,
    maxlog_llr,
)


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_unit_average_energy(order: int):
    """Verifica se a energia média de cada constelação é 1."""
    c = build_constellation(order)
    assert abs(np.mean(np.abs(c.points) ** 2) - 1.0) < 1e-12


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_labels_are_unique(order: int):
    """Verifica se cada ponto tem um rótulo distinto e os pontos são distintos."""
    c = build_constellation(order)
    assert len({tuple(label) for label in c.labels}) == order
    assert len(np.unique(np.round(c.points, 12))) == order


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_gray_neighbours_differ_in_one_bit(order: int):
    """Verifica se vizinhos à distância mínima diferem em exatamente um bit."""
    c = build_constellation(order)
    dist = np.abs(c.points[:, None] - c.points[None, :])
    d_min = np.min(dist[dist > 1e-9])
    i, j = np.nonzero(np.abs(dist - d_min) < 1e-9)
    hamming = np.sum(c.labels[i] != c.labels[j], axis=-1)
    assert np.all(hamming == 1)


def test_unsupported_order():
    """Verifica se uma ordem fora de {4, 16, 64} levanta UnsupportedOrder."""
    with pytest.raises(UnsupportedOrder):
        build_constellation(8)


def test_map_bits_length_mismatch():
    """Verifica se um número de bits não múltiplo de log2(M) levanta LengthMismatch."""
    with pytest.raises(LengthMismatch):
        map_bits([1, 0, 1], build_constellation(16))


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_hard_demap_recovers_mapped_bits(order: int):
    """Verifica se a decisão abrupta de símbolos sem ruído devolve os bits mapeados."""
    c = build_constellation(order)
    bits = np.random.default_rng(3).integers(0, 2, size=(50, c.bits_per_symbol), dtype=np.uint8)
    symbols = map_bits(bits, c)[:, 0]
    np.testing.assert_array_equal(hard_demap(symbols, c), bits)


def test_qpsk_llr_closed_form():
    """Verifica as LLRs max-log de QPSK contra a forma fechada 4·a·Re(z)/σ²."""
    c = build_constellation(4)
    z = np.array([0.3 - 0.2j, -0.05 + 0.4j])
    var = 0.5
    a = 1.0 / np.sqrt(2.0)
    expected = np.stack([4 * a * z.real / var, 4 * a * z.imag / var], axis=-1)
    np.testing.assert_allclose(maxlog_llr(z, 1.0, var, c), expected, rtol=1e-12)


def test_llr_sign_matches_hard_decision():
    """Verifica se o sinal das LLRs coincide com a decisão abrupta."""
    c = build_constellation(16)
    z = np.random.default_rng(5).standard_normal(200) * 0.8 + 1j * np.random.default_rng(6).standard_normal(200) * 0.8
    llr = maxlog_llr(z, 1.0, 0.1, c)
    bits = hard_demap(z, c)
    assert np.all((llr > 0) == (bits == 1))


def test_llr_clipping():
    """Verifica se as LLRs ficam saturadas em ±clip."""
    c = build_constellation(64)
    llr = maxlog_llr(5.0 + 5.0j, 1.0, 1e-6, c, clip=7.5)
    assert np.max(np.abs(llr)) == 7.5
