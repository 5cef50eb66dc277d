from dataclasses import dataclass

import numpy as np

from attdetengine.channel.channel import ChannelConfig, apply_channel, draw_realization, snr_to_noise_var
from attdetengine.exceptions import ConfigError
from attdetengine.modem.constellation import build_constellation


@dataclass(frozen=True, eq=False)
class TrainingBatch:
    """
    Lote supervisionado de REs.

    Attributes
    ----------
    h_true, h_est : np.ndarray
        ``(B, N_r, N_t)``.
    y : np.ndarray
        ``(B, N_r)``.
    noise_var : np.ndarray
        ``(B,)``.
    bits : np.ndarray
        ``(B, N_t, max_bits)`` em {0, 1}; posições além de ``bits_per_symbol[b]`` são zero.
    bits_per_symbol : np.ndarray
        ``(B,)``; uma única ordem para todas as camadas de uma amostra.
    grid_shape : tuple[int, int] or None
        Grade ``(G1, G2)`` em que o lote está organizado (ordem C), se houver.
    """

    h_true: np.ndarray
    h_est: np.ndarray
    y: np.ndarray
    noise_var: np.ndarray
    bits: np.ndarray
    bits_per_symbol: np.ndarray
    grid_shape: tuple[int, int] | None = None

    @property
    def batch_size(self) -> int:
        return self.y.shape[0]

    @property
    def n_layers(self) -> int:
        return self.h_est.shape[-1]


def generate_batch(
    channel: ChannelConfig,
    size: int,
    snr_range_db: tuple[float, float],
    orders: tuple[int, ...],
    max_bits: int,
    rng: np.random.Generator,
    grid_shape: tuple[int, int] | None = None,
) -> TrainingBatch:
    """
    Gera um lote novo: SNR uniforme na faixa, ordem sorteada por amostra, canal, símbolos e ruído.

    Com `grid_shape`, a SNR e a ordem são sorteadas por grade e `size` deve ser múltiplo de
    ``G1 * G2``. Os sorteios seguem sempre a mesma ordem (SNR, ordem, bits, canal, erro de CSI,
    ruído), então o lote é uma função determinística do estado de `rng`.

    Raises
    ------
    ConfigError
        Se a faixa de SNR, as ordens ou o tamanho forem inválidos.

    Examples
    --------
    >>> b = generate_batch(ChannelConfig(n_rx=2, n_tx=2), 3, (10.0, 10.0), (4,), 2, np.random.default_rng(0))
    >>> b.bits.shape, b.bits_per_symbol.tolist()
    ((3, 2, 2), [2, 2, 2])
    """
    lo, hi = snr_range_db
    if lo > hi:
        raise ConfigError(f"SNR range must be ascending, got [{lo}, {hi}].")
    if size < 1:
        raise ConfigError(f"Batch size must be >= 1, got {size}.")
    if not orders:
        raise ConfigError("At least one modulation order is needed.")
    per_group = 1 if grid_shape is None else grid_shape[0] * grid_shape[1]
    if size % per_group:
        raise ConfigError(f"Batch size {size} is not a whole number of {grid_shape} grids.")
    n_groups = size // per_group

    snr_db = np.repeat(rng.uniform(lo, hi, size=n_groups), per_group)
    order_idx = np.repeat(rng.integers(0, len(orders), size=n_groups), per_group)
    n_tx = channel.n_tx
    bits = rng.integers(0, 2, size=(size, n_tx, max_bits), dtype=np.uint8)
    bps = np.empty(size, dtype=np.int64)
    x = np.empty((size, n_tx), dtype=np.complex128)
    for i, order in enumerate(orders):
        c = build_constellation(order)
        if c.bits_per_symbol > max_bits:
            raise ConfigError(f"{order}-QAM needs {c.bits_per_symbol} bits but the model has max_bits={max_bits}.")
        sel = order_idx == i
        bps[sel] = c.bits_per_symbol
        bits[sel, :, c.bits_per_symbol :] = 0
        weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
        x[sel] = c.points[bits[sel, :, : c.bits_per_symbol].astype(np.int64) @ weights]

    noise_var = snr_to_noise_var(snr_db, n_tx)
    realization = draw_realization(channel, noise_var, rng, size)
    y = apply_channel(realization.h_true, x, realization.noise_var, rng)
    return TrainingBatch(
        h_true=realization.h_true,
        h_est=realization.h_est,
        y=y,
        noise_var=realization.noise_var,
        bits=bits,
        bits_per_symbol=bps,
        grid_shape=grid_shape,
    )
