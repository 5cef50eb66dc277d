import numpy as np
import pytest

from attdetengine.attdet.params import ArchConfig, ModelParams, init_params
from attdetengine.channel.channel import ChannelConfig
from attdetengine.training.backprop import backward, batch_loss
from attdetengine.training.batch import TrainingBatch, generate_batch

ARCH = ArchConfig(d=8, n_heads=2, n_layers=2, max_bits=4)


@pytest.fixture
def params() -> ModelParams:
    """Parâmetros da arquitetura pequena para N_r = 4, com vieses deslocados para ReLUs ativas."""
    p = init_params(ARCH, 4, np.random.default_rng(31))
    for name in p:
        if name.endswith(".b1"):
            p.tensors[name] += 0.5
    return p


def _batch(n_tx: int, size: int = 6, seed: int = 0) -> TrainingBatch:
    channel = ChannelConfig(n_rx=4, n_tx=n_tx)
    return generate_batch(channel, size, (5.0, 15.0), (4, 16), ARCH.max_bits, np.random.default_rng(seed))


def _grads(batch: TrainingBatch, params: ModelParams) -> tuple[float, ModelParams]:
    loss, flat = backward(batch, params, ARCH)
    return loss, ModelParams.unflatten(flat, ARCH, params.n_rx)


def test_duplicated_batch_keeps_mean_gradient(params: ModelParams):
    """Verifica se repetir o lote inteiro não altera a perda média nem o seu gradiente."""
    batch = _batch(2)
    doubled = TrainingBatch(
        h_true=np.concatenate([batch.h_true, batch.h_true]),
        h_est=np.concatenate([batch.h_est, batch.h_est]),
        y=np.concatenate([batch.y, batch.y]),
        noise_var=np.concatenate([batch.noise_var, batch.noise_var]),
        bits=np.concatenate([batch.bits, batch.bits]),
        bits_per_symbol=np.concatenate([batch.bits_per_symbol, batch.bits_per_symbol]),
    )
    loss, grad = backward(batch, params, ARCH)
    loss2, grad2 = backward(doubled, params, ARCH)
    assert loss2 == pytest.approx(loss, rel=1e-12)
    np.testing.assert_allclose(grad2, grad, rtol=1e-10, atol=1e-13)


def test_zero_output_weights_cut_the_graph(params: ModelParams):
    """Verifica se com a saída do MLP de LLR zerada a perda é ln 2 e só a cabeça recebe gradiente."""
    params.tensors["mlp_llr.w2"][:] = 0.0
    params.tensors["mlp_llr.b2"][:] = 0.0
    loss, grads = _grads(_batch(2), params)
    assert loss == pytest.approx(np.log(2.0), rel=1e-12)
    assert np.any(grads["mlp_llr.w2"] != 0.0)
    for name in grads:
        if name not in ("mlp_llr.w2", "mlp_llr.b2"):
            assert np.all(grads[name] == 0.0), name


def test_single_layer_has_no_pair_gradient(params: ModelParams):
    """Verifica se com N_t = 1 o MLP de pares não recebe gradiente e o MLP próprio recebe."""
    _, grads = _grads(_batch(1), params)
    for t in range(ARCH.n_layers):
        for part in ("w1", "b1", "w2", "b2"):
            assert np.all(grads[f"layer{t}.mlp_i.{part}"] == 0.0)
        assert np.any(grads[f"layer{t}.mlp_s.w1"] != 0.0)


def test_extreme_inputs_stay_finite(params: ModelParams):
    """Verifica perda, logits e gradiente finitos com ‖Ĥ‖_F e ‖y‖ no limite de 100."""
    batch = _batch(2, size=8, seed=3)
    h = batch.h_est * (99.9 / np.linalg.norm(batch.h_est, axis=(1, 2)))[:, None, None]
    y = batch.y * (99.9 / np.linalg.norm(batch.y, axis=1))[:, None]
    extreme = TrainingBatch(
        h_true=h,
        h_est=h,
        y=y,
        noise_var=batch.noise_var,
        bits=batch.bits,
        bits_per_symbol=batch.bits_per_symbol,
    )
    loss, dlogits, cache = batch_loss(extreme, params, ARCH)
    _, grad = backward(extreme, params, ARCH)
    assert np.isfinite(loss)
    assert np.all(np.isfinite(dlogits))
    assert np.all(np.isfinite(cache.v_final))
    assert np.all(np.isfinite(grad))
