import numpy as np
import pytest

from attdetengine.channel.channel import ChannelConfig, apply_channel, sample_channel, snr_to_noise_var
from attdetengine.channel.rng import make_rng
from attdetengine.modem.constellation import build_constellation


class Scenario:
    """Lote de REs com bits, símbolos, canal e sinal recebido."""

    def __init__(self, n_rx: int, n_tx: int, order: int, size: int, snr_db: float | None, seed: int) -> None:
        rng = make_rng(seed)
        self.c = build_constellation(order)
        self.bits = rng.integers(0, 2, size=(size, n_tx, self.c.bits_per_symbol), dtype=np.uint8)
        weights = 1 << np.arange(self.c.bits_per_symbol - 1, -1, -1)
        self.x = self.c.points[self.bits.astype(np.int64) @ weights]
        self.h = sample_channel(ChannelConfig(n_rx=n_rx, n_tx=n_tx), rng, size)
        self.noise_var = 0.0 if snr_db is None else snr_to_noise_var(snr_db, n_tx)
        self.y = apply_channel(self.h, self.x, self.noise_var, rng)


@pytest.fixture
def scenario():
    """Fábrica de cenários: ``scenario(n_rx, n_tx, order, size, snr_db=None, seed=0)``."""

    def build(n_rx: int, n_tx: int, order: int, size: int, snr_db: float | None = None, seed: int = 0) -> Scenario:
        return Scenario(n_rx, n_tx, order, size, snr_db, seed)

    return build
