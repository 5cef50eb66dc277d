from dataclasses import asdict, dataclass
from pathlib import Path

import pandas as pd

from attdetengine.config.logger import LogFactory
from attdetengine.exceptions import ConfigError

logger = LogFactory.get_logger("Results")

RESULT_COLUMNS = ["detector", "snr_db", "bit_errors", "bits_counted", "ber", "re_counted", "seed", "stop_reason"]
STOP_REASONS = ("errors", "budget")


@dataclass(frozen=True)
class BerPoint:
    """
    Um ponto de uma curva de BER.

    Attributes
    ----------
    detector : str
        Rótulo do detector.
    snr_db : float
        SNR do ponto.
    bit_errors : int
        Bits decididos errado.
    bits_counted : int
        Bits comparados (sempre > 0).
    re_counted : int
        REs simulados.
    seed : int
        Semente do experimento.
    stop_reason : str
        ``"errors"`` quando ``min_bit_errors`` foi atingido, ``"budget"`` quando o orçamento de
        REs se esgotou antes.

    Examples
    --------
    >>> BerPoint("zf", 4.0, 10, 1000, 250, 0, "budget").ber
    0.01
    """

    detector: str
    snr_db: float
    bit_errors: int
    bits_counted: int
    re_counted: int
    seed: int
    stop_reason: str

    def __post_init__(self) -> None:
        if self.bits_counted <= 0:
            raise ValueError(f"bits_counted must be > 0, got {self.bits_counted}.")
        if self.stop_reason not in STOP_REASONS:
            raise ValueError(f"stop_reason must be one of {STOP_REASONS}, got {self.stop_reason!r}.")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_counted

    def to_row(self) -> dict:
        return {**asdict(self), "ber": self.ber}


def points_to_frame(points) -> pd.DataFrame:
    """Tabela com uma linha por ponto, nas colunas estáveis de `RESULT_COLUMNS`."""
    return pd.DataFrame([p.to_row() for p in points], columns=RESULT_COLUMNS)


def write_results(points, path) -> Path:
    """
    Grava os pontos em CSV (sobrescreve o arquivo).

    Returns
    -------
    Path
        Caminho gravado.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    points_to_frame(points).to_csv(path, index=False)
    logger.info("Wrote %d BER points to %s.", len(points), path)
    return path


def read_results(path) -> list[BerPoint]:
    """
    Lê um CSV gravado por `write_results`.

    Raises
    ------
    ConfigError
        Se o arquivo não existir ou não tiver as colunas esperadas.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Results file not found: {path}")
    frame = pd.read_csv(path)
    if list(frame.columns) != RESULT_COLUMNS:
        raise ConfigError(f"{path} has columns {list(frame.columns)}, expected {RESULT_COLUMNS}.")
    return [
        BerPoint(
            detector=str(row.detector),
            snr_db=float(row.snr_db),
            bit_errors=int(row.bit_errors),
            bits_counted=int(row.bits_counted),
            re_counted=int(row.re_counted),
            seed=int(row.seed),
            stop_reason=str(row.stop_reason),
        )
        for row in frame.itertuples(index=False)
    ]
