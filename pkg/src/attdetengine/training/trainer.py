import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from attdetengine.attdet.checkpoint import save_checkpoint
from attdetengine.attdet.model import forward_cached
from attdetengine.attdet.params import ArchConfig, ModelParams, init_params
from attdetengine.channel.channel import ChannelConfig
from attdetengine.channel.rng import make_rng
from attdetengine.config.logger import LogFactory
from attdetengine.exceptions import ConfigError, DivergenceDetected
from attdetengine.modem.constellation import SUPPORTED_ORDERS
from attdetengine.training.backprop import backward
from attdetengine.training.batch import generate_batch
from attdetengine.training.loss import bit_mask
from attdetengine.training.optimizer import OptimizerState, adam_step

logger = LogFactory.get_logger("Trainer")

LOG_COLUMNS = ["step", "samples_seen", "loss", "eval_snr_db", "eval_ber", "wall_seconds"]
INIT_STREAM = 1
TRAIN_STREAM = 2
EVAL_STREAM = 3
_EVAL_CHUNK = 4096


@dataclass(frozen=True)
class TrainConfig:
    """
    Configuração do treinamento supervisionado.

    Attributes
    ----------
    samples_total : int
        Amostras pedidas ao longo do treino (cada passo consome `batch_size`). Com `grid_shape`,
        cada lote é arredondado para baixo a um número inteiro de grades e o log registra as
        amostras de fato geradas.
    batch_size : int
        Amostras por passo.
    lr : float
        Taxa de aprendizado do Adam.
    snr_range_db : tuple[float, float]
        Faixa uniforme de SNR de treino.
    orders : tuple[int, ...]
        Modulações sorteadas por amostra.
    channel : ChannelConfig
        Canal de treino (inclui ``csi_error_var`` e a semente).
    eval_every : int
        Passos entre avaliações de BER (0 desativa as intermediárias).
    eval_snr_db : float
        SNR da avaliação.
    eval_samples : int
        Amostras do conjunto de avaliação fixo.
    checkpoint_every : int
        Passos entre checkpoints (0 grava apenas o final).
    checkpoint_path : str or None
        Destino dos checkpoints.
    log_path : str or None
        CSV de log (append-only).
    grid_shape : tuple[int, int] or None
        Grade de REs por amostra de treino, usada com suavização de escores.
    divergence_factor : float
        Múltiplo da perda inicial considerado divergente.
    divergence_patience : int
        Passos consecutivos acima do limite antes de abortar.
    """

    samples_total: int = 6_000_000
    batch_size: int = 256
    lr: float = 1e-3
    snr_range_db: tuple[float, float] = (0.0, 20.0)
    orders: tuple[int, ...] = (16,)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    eval_every: int = 500
    eval_snr_db: float = 10.0
    eval_samples: int = 20_000
    checkpoint_every: int = 0
    checkpoint_path: str | None = None
    log_path: str | None = None
    grid_shape: tuple[int, int] | None = None
    divergence_factor: float = 10.0
    divergence_patience: int = 100

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}.")
        if self.samples_total < 1:
            raise ConfigError(f"samples_total must be >= 1, got {self.samples_total}.")
        if self.lr < 0.0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}.")
        lo, hi = self.snr_range_db
        if lo > hi:
            raise ConfigError(f"snr_range_db must satisfy lo <= hi, got [{lo}, {hi}].")
        if not self.orders or any(o not in SUPPORTED_ORDERS for o in self.orders):
            raise ConfigError(f"orders must be a non-empty subset of {SUPPORTED_ORDERS}, got {self.orders}.")
        if self.eval_every < 0 or self.checkpoint_every < 0:
            raise ConfigError("eval_every and checkpoint_every must be >= 0.")
        if self.eval_samples < 1:
            raise ConfigError(f"eval_samples must be >= 1, got {self.eval_samples}.")

    @property
    def n_steps(self) -> int:
        return math.ceil(self.samples_total / self.batch_size)


def evaluate_ber(
    params: ModelParams,
    arch: ArchConfig,
    channel: ChannelConfig,
    snr_db: float,
    orders: tuple[int, ...],
    n_samples: int,
    seed: int,
    grid_shape: tuple[int, int] | None = None,
) -> float:
    """
    BER de decisão abrupta do modelo num conjunto fixo de amostras.

    O conjunto depende apenas de ``(seed, canal, snr_db, orders, n_samples)``, então avaliações
    sucessivas do mesmo treino são comparáveis entre si.
    """
    rng = make_rng(seed, EVAL_STREAM, name=channel.rng)
    chunk = _EVAL_CHUNK
    if grid_shape is not None:
        per_grid = grid_shape[0] * grid_shape[1]
        chunk = max(per_grid, chunk - chunk % per_grid)
        n_samples = max(per_grid, n_samples - n_samples % per_grid)
    errors = counted = 0
    for start in range(0, n_samples, chunk):
        size = min(chunk, n_samples - start)
        batch = generate_batch(channel, size, (snr_db, snr_db), orders, arch.max_bits, rng, grid_shape)
        logits, _ = forward_cached(batch.h_est, batch.y, params, arch, grid_shape)
        mask = bit_mask(batch.bits_per_symbol, batch.n_layers, arch.max_bits)
        wrong = (logits > 0.0) != batch.bits.astype(bool)
        errors += int(np.sum(wrong & mask))
        counted += int(mask.sum())
    return errors / counted


def _append_log(path: Path, row: dict) -> None:
    pd.DataFrame([row], columns=LOG_COLUMNS).to_csv(path, mode="a", header=not path.exists(), index=False)


def train(cfg: TrainConfig, arch: ArchConfig, params: ModelParams | None = None) -> tuple[ModelParams, pd.DataFrame]:
    """
    Treina o AttDet com amostras geradas na hora e Adam.

    Cada passo sorteia um lote novo (canal, símbolos, ruído; SNR uniforme; uma modulação por
    amostra), calcula o gradiente exato da BCE média e aplica um passo do Adam. A cada
    ``eval_every`` passos, e no último, a BER no conjunto de avaliação fixo é registrada.

    Parameters
    ----------
    cfg : TrainConfig
        Configuração do treino.
    arch : ArchConfig
        Arquitetura.
    params : ModelParams, optional
        Ponto de partida; por padrão, `init_params` com a semente do canal.

    Returns
    -------
    tuple[ModelParams, pd.DataFrame]
        Parâmetros finais e o log (colunas ``step, samples_seen, loss, eval_snr_db, eval_ber,
        wall_seconds``).

    Raises
    ------
    DivergenceDetected
        Se a perda virar NaN ou ficar acima de ``divergence_factor`` vezes a inicial por
        ``divergence_patience`` passos consecutivos.
    """
    channel = cfg.channel
    seed = channel.seed
    if any(int(np.log2(o)) > arch.max_bits for o in cfg.orders):
        raise ConfigError(f"orders {cfg.orders} need more than max_bits={arch.max_bits} bits.")
    if params is None:
        params = init_params(arch, channel.n_rx, make_rng(seed, INIT_STREAM, name=channel.rng))
    rng = make_rng(seed, TRAIN_STREAM, name=channel.rng)
    theta = params.flatten()
    opt = OptimizerState.create(theta.size, lr=cfg.lr)
    log_path = Path(cfg.log_path) if cfg.log_path else None
    if log_path is not None:
        log_path.parent.mkdir(parents=True, exist_ok=True)

    logger.info(
        "Training %d parameters for %d steps (batch %d, orders %s, SNR %s dB).",
        theta.size,
        cfg.n_steps,
        cfg.batch_size,
        cfg.orders,
        cfg.snr_range_db,
    )
    rows: list[dict] = []
    start = time.perf_counter()
    initial_loss = None
    above = 0
    samples_seen = 0
    saved_grid = cfg.grid_shape if arch.score_smoothing else None
    for step in range(1, cfg.n_steps + 1):
        size = min(step * cfg.batch_size, cfg.samples_total) - (step - 1) * cfg.batch_size
        if cfg.grid_shape is not None:
            per_grid = cfg.grid_shape[0] * cfg.grid_shape[1]
            size = max(per_grid, size - size % per_grid)
        batch = generate_batch(channel, size, cfg.snr_range_db, cfg.orders, arch.max_bits, rng, cfg.grid_shape)
        samples_seen += batch.batch_size
        loss, grads = backward(batch, params, arch)

        if not math.isfinite(loss):
            logger.error("Loss became %s at step %d.", loss, step)
            raise DivergenceDetected(f"Training loss is {loss} at step {step}.")
        if initial_loss is None:
            initial_loss = loss
        above = above + 1 if loss > cfg.divergence_factor * initial_loss else 0
        if above >= cfg.divergence_patience:
            logger.error("Loss above %.1fx its initial value for %d steps.", cfg.divergence_factor, above)
            raise DivergenceDetected(
                f"Loss {loss:.4g} exceeded {cfg.divergence_factor}x the initial {initial_loss:.4g} "
                f"for {above} consecutive steps (step {step})."
            )

        theta, opt = adam_step(theta, grads, opt)
        params = ModelParams.unflatten(theta, arch, channel.n_rx)

        last = step == cfg.n_steps
        if last or (cfg.eval_every and step % cfg.eval_every == 0):
            ber = evaluate_ber(params, arch, channel, cfg.eval_snr_db, cfg.orders, cfg.eval_samples, seed, cfg.grid_shape)
            row = {
                "step": step,
                "samples_seen": samples_seen,
                "loss": loss,
                "eval_snr_db": cfg.eval_snr_db,
                "eval_ber": ber,
                "wall_seconds": time.perf_counter() - start,
            }
            rows.append(row)
            if log_path is not None:
                _append_log(log_path, row)
            logger.info("step=%d samples=%d loss=%.5f eval_ber=%.4e", step, samples_seen, loss, ber)

        if cfg.checkpoint_path and (last or (cfg.checkpoint_every and step % cfg.checkpoint_every == 0)):
            save_checkpoint(cfg.checkpoint_path, params, saved_grid)

    return params, pd.DataFrame(rows, columns=LOG_COLUMNS)
