from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from attdetengine.attdet.checkpoint import inspect_checkpoint, load_checkpoint
from attdetengine.attdet.detector import AttDetDetector
from attdetengine.attdet.params import ArchConfig, init_params
from attdetengine.channel.channel import ChannelConfig
from attdetengine.channel.rng import make_rng
from attdetengine.detectors.linear import detect_mf
from attdetengine.exceptions import ConfigError, DivergenceDetected
from attdetengine.modem.constellation import build_constellation
from attdetengine.training import trainer
from attdetengine.training.backprop import batch_loss
from attdetengine.training.batch import generate_batch
from attdetengine.training.trainer import LOG_COLUMNS, TrainConfig, evaluate_ber, train

ARCH = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=4)


@pytest.fixture
def tiny(tmp_path) -> TrainConfig:
    """Treino de dois passos com avaliação e checkpoint em cada passo."""
    return TrainConfig(
        samples_total=48,
        batch_size=32,
        orders=(4, 16),
        channel=ChannelConfig(n_rx=2, n_tx=2, seed=5),
        eval_every=1,
        eval_samples=64,
        checkpoint_path=str(tmp_path / "ckpt" / "attdet.ckpt"),
        log_path=str(tmp_path / "logs" / "train.csv"),
    )


def test_train_writes_log_and_checkpoint(tiny: TrainConfig):
    """Verifica se o treino registra cada avaliação e grava o checkpoint final."""
    params, log = train(tiny, ARCH)
    assert tiny.n_steps == 2
    assert log.columns.tolist() == LOG_COLUMNS
    assert log["step"].tolist() == [1, 2]
    assert log["samples_seen"].tolist() == [32, 48]
    assert log["eval_ber"].between(0.0, 1.0).all()
    on_disk = pd.read_csv(tiny.log_path)
    assert on_disk["step"].tolist() == [1, 2]
    saved = load_checkpoint(tiny.checkpoint_path, ARCH, 2)
    np.testing.assert_array_equal(saved.flatten(), params.flatten())


def test_train_is_reproducible(tiny: TrainConfig):
    """Verifica se a mesma semente produz os mesmos parâmetros finais."""
    a, _ = train(tiny, ARCH)
    b, _ = train(tiny, ARCH)
    np.testing.assert_array_equal(a.flatten(), b.flatten())


def test_train_zero_lr_keeps_params(tiny: TrainConfig):
    """Verifica se lr = 0 deixa os parâmetros iniciais intactos."""
    cfg = replace(tiny, lr=0.0, checkpoint_path=None, log_path=None)
    start = init_params(ARCH, 2, make_rng(5, trainer.INIT_STREAM))
    params, _ = train(cfg, ARCH, start)
    np.testing.assert_array_equal(params.flatten(), start.flatten())


def test_train_detects_sustained_loss_growth(tiny: TrainConfig, monkeypatch):
    """Verifica se a perda acima de divergence_factor vezes a inicial aborta após a paciência."""
    losses = iter([1.0, 50.0, 50.0, 50.0])

    def fake_backward(batch, params, arch):
        return next(losses), np.zeros(params.size)

    monkeypatch.setattr(trainer, "backward", fake_backward)
    cfg = TrainConfig(
        samples_total=128,
        batch_size=32,
        orders=(4,),
        channel=tiny.channel,
        eval_every=0,
        eval_samples=32,
        divergence_patience=2,
    )
    with pytest.raises(DivergenceDetected, match="step 3"):
        train(cfg, ARCH)


def test_train_detects_nan_loss(tiny: TrainConfig, monkeypatch):
    """Verifica se uma perda NaN aborta o treino imediatamente."""
    monkeypatch.setattr(trainer, "backward", lambda batch, params, arch: (float("nan"), np.zeros(params.size)))
    with pytest.raises(DivergenceDetected, match="step 1"):
        train(tiny, ARCH)


def test_evaluate_ber_fixed_set():
    """Verifica se a avaliação usa um conjunto fixo: duas chamadas dão a mesma BER."""
    params = init_params(ARCH, 2, np.random.default_rng(0))
    channel = ChannelConfig(n_rx=2, n_tx=2, seed=9)
    a = evaluate_ber(params, ARCH, channel, 10.0, (16,), 100, seed=9)
    b = evaluate_ber(params, ARCH, channel, 10.0, (16,), 100, seed=9)
    assert a == b
    assert 0.0 <= a <= 1.0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"batch_size": 0},
        {"samples_total": 0},
        {"lr": -1e-3},
        {"snr_range_db": (20.0, 0.0)},
        {"orders": (8,)},
        {"orders": ()},
        {"eval_every": -1},
        {"eval_samples": 0},
    ],
)
def test_train_config_validation(kwargs: dict):
    """Verifica se configurações de treino inválidas levantam ConfigError."""
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_train_rejects_orders_beyond_model(tiny: TrainConfig):
    """Verifica se treinar 64-QAM num modelo de 4 bits levanta ConfigError."""
    with pytest.raises(ConfigError):
        train(replace(tiny, orders=(64,)), ARCH)


SMOOTH_ARCH = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=4, score_smoothing=True)


@pytest.fixture
def smoothing_run(tmp_path):
    """Treino curto com suavização numa grade 2x2; lotes de 6 viram uma grade de 4 REs."""
    cfg = TrainConfig(
        samples_total=12,
        batch_size=6,
        orders=(4,),
        channel=ChannelConfig(n_rx=2, n_tx=2, seed=7),
        eval_every=1,
        eval_samples=40,
        grid_shape=(2, 2),
        checkpoint_path=str(tmp_path / "smooth.ckpt"),
    )
    params, log = train(cfg, SMOOTH_ARCH)
    return cfg, params, log


def test_samples_seen_counts_whole_grids(smoothing_run):
    """Verifica se samples_seen soma as amostras de fato geradas após o arredondamento à grade."""
    cfg, _, log = smoothing_run
    assert log["samples_seen"].tolist() == [4, 8]
    assert inspect_checkpoint(cfg.checkpoint_path).grid_shape == (2, 2)


def test_smoothing_checkpoint_detects_like_trainer(smoothing_run):
    """Verifica se o detector carregado do checkpoint reproduz a BER de avaliação do treino."""
    cfg, params, log = smoothing_run
    detector = AttDetDetector.from_checkpoint(cfg.checkpoint_path)
    assert detector.grid_shape == (2, 2)
    assert detector.res_per_call == 4

    rng = make_rng(7, trainer.EVAL_STREAM, name=cfg.channel.rng)
    batch = generate_batch(cfg.channel, 40, (10.0, 10.0), (4,), SMOOTH_ARCH.max_bits, rng, (2, 2))
    result = detector.detect(batch.h_est, batch.y, batch.noise_var, build_constellation(4))
    ber = float(np.mean(result.hard_bits != batch.bits[..., :2]))
    assert ber == evaluate_ber(params, SMOOTH_ARCH, cfg.channel, 10.0, (4,), 40, 7, (2, 2))
    assert ber == log["eval_ber"].iloc[-1]


def test_training_beats_matched_filter():
    """Verifica se um treino curto reduz a perda e termina com BER abaixo do filtro casado."""
    arch = ArchConfig(d=16, n_heads=2, n_layers=2, max_bits=2)
    channel = ChannelConfig(n_rx=2, n_tx=2, seed=3)
    cfg = TrainConfig(
        samples_total=128 * 600,
        batch_size=128,
        lr=3e-3,
        snr_range_db=(10.0, 20.0),
        orders=(4,),
        channel=channel,
        eval_every=0,
        eval_snr_db=15.0,
        eval_samples=4000,
    )
    start = init_params(arch, 2, make_rng(3, trainer.INIT_STREAM, name=channel.rng))
    params, log = train(cfg, arch)

    held_out = generate_batch(channel, 2000, (15.0, 15.0), (4,), arch.max_bits, np.random.default_rng(77))
    assert batch_loss(held_out, params, arch)[0] < 0.7 * batch_loss(held_out, start, arch)[0]

    rng = make_rng(3, trainer.EVAL_STREAM, name=channel.rng)
    eval_set = generate_batch(channel, 4000, (15.0, 15.0), (4,), arch.max_bits, rng)
    mf = detect_mf(eval_set.h_est, eval_set.y, eval_set.noise_var, build_constellation(4))
    mf_ber = float(np.mean(mf.hard_bits != eval_set.bits))
    assert log["eval_ber"].iloc[-1] < mf_ber
