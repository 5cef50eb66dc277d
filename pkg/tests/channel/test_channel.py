import numpy as np
import pytest

from attdetengine.channel.channel import (
    ChannelConfig,
    apply_channel,
    draw_realization,
    exponential_correlation_root,
    perturb_csi,
    sample_channel,
    snr_to_noise_var,
)
from attdetengine.channel.rng import make_rng
from attdetengine.exceptions import ConfigError, DimensionMismatch


def test_make_rng_reproducible_and_keyed():
    """Verifica se a mesma chave reproduz o fluxo e chaves diferentes o alteram."""
    a = make_rng(11, 2, 3).standard_normal(5)
    b = make_rng(11, 2, 3).standard_normal(5)
    c = make_rng(11, 2, 4).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_make_rng_generators_differ():
    """Verifica se philox e pcg64 geram fluxos distintos para a mesma semente."""
    a = make_rng(0, name="philox").standard_normal(4)
    b = make_rng(0, name="pcg64").standard_normal(4)
    assert not np.array_equal(a, b)


def test_make_rng_unknown_generator():
    """Verifica se um gerador desconhecido levanta ConfigError."""
    with pytest.raises(ConfigError):
        make_rng(0, name="mt19937")


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_rx": 1, "n_tx": 2},
        {"model": "rayleigh"},
        {"rho_tx": 1.0},
        {"rho_rx": -0.1},
        {"csi_error_var": -1.0},
        {"rng": "xorshift"},
    ],
)
def test_channel_config_validation(kwargs: dict):
    """Verifica se parâmetros inválidos do canal levantam ConfigError."""
    with pytest.raises(ConfigError):
        ChannelConfig(**kwargs)


def test_iid_unit_variance():
    """Verifica se as entradas do canal i.i.d. têm variância unitária."""
    h = sample_channel(ChannelConfig(), make_rng(1), size=20_000)
    assert h.shape == (20_000, 8, 2)
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.02


def test_kronecker_without_correlation_equals_iid():
    """Verifica se Kronecker com rho = 0 coincide bit a bit com o canal i.i.d. no mesmo fluxo."""
    iid = sample_channel(ChannelConfig(model="iid"), make_rng(4), size=10)
    kron = sample_channel(ChannelConfig(model="kronecker"), make_rng(4), size=10)
    np.testing.assert_array_equal(iid, kron)


def test_kronecker_transmit_correlation():
    """Verifica se a correlação empírica entre colunas vizinhas se aproxima de rho_tx."""
    cfg = ChannelConfig(model="kronecker", rho_tx=0.8)
    h = sample_channel(cfg, make_rng(2), size=20_000)
    corr = np.mean(h[:, :, 0] * np.conj(h[:, :, 1])).real
    assert abs(corr - 0.8) < 0.03


def test_exponential_correlation_root():
    """Verifica se L Lᵀ reproduz a matriz de correlação exponencial."""
    root = exponential_correlation_root(0.5, 3)
    expected = np.array([[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]])
    np.testing.assert_allclose(root @ root.T, expected, atol=1e-12)


def test_awgn_channel_is_identity():
    """Verifica se o modelo awgn devolve a identidade (N_r x N_t)."""
    h = sample_channel(ChannelConfig(n_rx=1, n_tx=1, model="awgn"), make_rng(0), size=3)
    np.testing.assert_array_equal(h, np.ones((3, 1, 1)))


def test_snr_to_noise_var_array():
    """Verifica a conversão de SNR em variância de ruído para uma grade."""
    np.testing.assert_allclose(snr_to_noise_var(np.array([0.0, 10.0]), 2), [2.0, 0.2])


def test_apply_channel_noiseless():
    """Verifica se sem ruído y = Hx exatamente."""
    rng = make_rng(3)
    h = sample_channel(ChannelConfig(n_rx=4, n_tx=2), rng, size=5)
    x = np.ones((5, 2), dtype=np.complex128)
    y = apply_channel(h, x, 0.0, rng)
    np.testing.assert_array_equal(y, np.einsum("brn,bn->br", h, x))


def test_apply_channel_noise_variance():
    """Verifica se a variância empírica do ruído corresponde a σ²."""
    y = apply_channel(np.zeros((50_000, 1, 1)), np.zeros((50_000, 1)), 0.25, make_rng(8))
    assert abs(np.mean(np.abs(y) ** 2) - 0.25) < 0.01


def test_apply_channel_dimension_mismatch():
    """Verifica se x com número errado de camadas levanta DimensionMismatch."""
    with pytest.raises(DimensionMismatch):
        apply_channel(np.ones((2, 2)), np.ones(3), 0.1, make_rng(0))


def test_perturb_csi():
    """Verifica se σ_e² = 0 preserva o canal e σ_e² > 0 adiciona erro com a variância pedida."""
    h = np.ones((20_000, 2, 2), dtype=np.complex128)
    np.testing.assert_array_equal(perturb_csi(h, 0.0, make_rng(0)), h)
    err = perturb_csi(h, 0.1, make_rng(0)) - h
    assert abs(np.mean(np.abs(err) ** 2) - 0.1) < 0.005


def test_draw_realization_shapes():
    """Verifica os shapes e a variância de ruído replicada por RE."""
    real = draw_realization(ChannelConfig(csi_error_var=0.05), 0.3, make_rng(9), size=7)
    assert real.h_true.shape == real.h_est.shape == (7, 8, 2)
    np.testing.assert_array_equal(real.noise_var, np.full(7, 0.3))
    assert not np.array_equal(real.h_true, real.h_est)
