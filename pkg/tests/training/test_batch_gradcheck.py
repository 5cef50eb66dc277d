from dataclasses import replace

import numpy as np
import pytest

from attdetengine.attdet.params import ArchConfig, param_count
from attdetengine.channel.channel import ChannelConfig
from attdetengine.exceptions import ConfigError
from attdetengine.training.batch import generate_batch
from attdetengine.training.gradcheck import (
    GRADCHECK_THRESHOLD,
    SMOOTHING_GRID,
    gradcheck_preset,
    relative_error,
    run_grad_check,
)

CHANNEL = ChannelConfig(n_rx=4, n_tx=2)


def test_batch_shapes_and_zero_padding():
    """Verifica os shapes do lote e o zero nos bits além de bits_per_symbol."""
    batch = generate_batch(CHANNEL, 50, (0.0, 20.0), (4, 16, 64), 6, np.random.default_rng(1))
    assert batch.h_est.shape == (50, 4, 2)
    assert batch.y.shape == (50, 4)
    assert batch.bits.shape == (50, 2, 6)
    assert set(batch.bits_per_symbol.tolist()) <= {2, 4, 6}
    for b, bps in enumerate(batch.bits_per_symbol):
        assert np.all(batch.bits[b, :, bps:] == 0)


def test_batch_deterministic():
    """Verifica se o mesmo estado do gerador produz o mesmo lote."""
    a = generate_batch(CHANNEL, 8, (5.0, 10.0), (16,), 4, np.random.default_rng(3))
    b = generate_batch(CHANNEL, 8, (5.0, 10.0), (16,), 4, np.random.default_rng(3))
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.bits, b.bits)


def test_batch_grid_shares_snr_and_order():
    """Verifica se, com grade, a SNR e a ordem são constantes dentro de cada grade."""
    batch = generate_batch(CHANNEL, 18, (0.0, 20.0), (4, 16), 4, np.random.default_rng(2), grid_shape=(3, 3))
    var = batch.noise_var.reshape(2, 9)
    bps = batch.bits_per_symbol.reshape(2, 9)
    assert np.all(var == var[:, :1])
    assert np.all(bps == bps[:, :1])


@pytest.mark.parametrize(
    ("size", "snr", "orders", "max_bits", "grid"),
    [
        (10, (0.0, 20.0), (4,), 4, (3, 3)),
        (0, (0.0, 20.0), (4,), 4, None),
        (4, (20.0, 0.0), (4,), 4, None),
        (4, (0.0, 20.0), (), 4, None),
        (4, (0.0, 20.0), (64,), 4, None),
    ],
)
def test_batch_invalid(size, snr, orders, max_bits, grid):
    """Verifica se parâmetros de lote inválidos levantam ConfigError."""
    with pytest.raises(ConfigError):
        generate_batch(CHANNEL, size, snr, orders, max_bits, np.random.default_rng(0), grid)


def test_relative_error_symmetric():
    """Verifica a definição simétrica do erro relativo."""
    assert float(relative_error(1.0, 3.0)) == pytest.approx(0.5)
    assert float(relative_error(0.0, 0.0)) == 0.0


def test_gradcheck_small_preset_passes():
    """Verifica o backward da configuração pequena em todas as coordenadas."""
    arch, channel = gradcheck_preset("small")
    report = run_grad_check(arch, channel)
    assert report.n_checked == report.n_params == 3062
    assert report.passed
    assert report.max_rel_error < GRADCHECK_THRESHOLD


def test_gradcheck_with_score_smoothing():
    """Verifica o backward da suavização de escores sobre uma grade 3x3."""
    arch, channel = gradcheck_preset("small", smoothing=True, seed=1)
    report = run_grad_check(arch, channel, grid_shape=SMOOTHING_GRID)
    assert report.n_params == 3062 + 208
    assert report.passed


def test_gradcheck_sixteen_qam_shared_qk():
    """Verifica o backward com 16-QAM, MLP de consulta/chave compartilhada e vieses deslocados."""
    arch = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=4, share_qk=True)
    report = run_grad_check(arch, ChannelConfig(n_rx=2, n_tx=2, seed=4), order=16, init_shift=1.0)
    assert report.max_rel_error < GRADCHECK_THRESHOLD


def test_gradcheck_shared_layer_params():
    """Verifica o backward com um único bloco de parâmetros compartilhado entre as camadas."""
    arch = ArchConfig(d=8, n_heads=2, n_layers=2, max_bits=2, share_layer_params=True)
    channel = ChannelConfig(n_rx=2, n_tx=2, seed=5)
    report = run_grad_check(arch, channel, init_shift=1.0)
    assert report.n_params == param_count(arch, 2)
    assert report.n_params < param_count(replace(arch, share_layer_params=False), 2)
    assert report.passed


def test_gradcheck_without_residual():
    """Verifica o backward quando as camadas substituem as embeddings de valor em vez de somá-las."""
    arch = ArchConfig(d=8, n_heads=2, n_layers=2, max_bits=2, residual=False)
    report = run_grad_check(arch, ChannelConfig(n_rx=2, n_tx=2, seed=6), init_shift=1.0)
    assert report.passed


def test_gradcheck_limits():
    """Verifica se modelos acima de 5e4 parâmetros e passos não positivos são rejeitados."""
    with pytest.raises(ConfigError):
        run_grad_check(ArchConfig(), ChannelConfig(n_rx=4, n_tx=2))
    arch, channel = gradcheck_preset("small")
    with pytest.raises(ConfigError):
        run_grad_check(arch, channel, eps=0.0)
    with pytest.raises(ConfigError):
        gradcheck_preset("huge")
