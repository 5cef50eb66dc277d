from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from attdetengine.exceptions import DimensionMismatch
from attdetengine.modem.constellation import Constellation

LLR_VAR_FLOOR = 1e-30


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """
    Saída uniforme de todos os detectores.

    Os campos têm um eixo de lote inicial quando o detector recebeu um lote de REs, e nenhum
    eixo de lote quando recebeu um único RE.

    Attributes
    ----------
    llrs : np.ndarray
        LLRs por camada, ``(..., N_t, bits_per_symbol)``, convenção ``log(P(1)/P(0))``.
    hard_bits : np.ndarray
        Decisões abruptas, mesmo shape de `llrs`, dtype ``uint8``.
    hard_symbols : np.ndarray
        Símbolos decididos, ``(..., N_t)``.
    detector_name : str
        Rótulo do detector (``"zf"``, ``"kbest(16)"``...).
    """

    llrs: np.ndarray
    hard_bits: np.ndarray
    hard_symbols: np.ndarray
    detector_name: str

    @property
    def n_layers(self) -> int:
        return self.hard_symbols.shape[-1]


def as_batch(h, y, noise_var=None) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """
    Normaliza entradas de um único RE ou de um lote para a forma em lote.

    Returns
    -------
    tuple
        ``(h (B, N_r, N_t), y (B, N_r), noise_var (B,), single)``, onde `single` indica que a
        entrada era um único RE.

    Raises
    ------
    DimensionMismatch
        Se as dimensões de `h` e `y` forem incompatíveis.
    """
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    single = h.ndim == 2
    if single:
        h = h[None]
        y = y.reshape(1, -1)
    if h.ndim != 3 or y.ndim != 2 or h.shape[:2] != y.shape:
        raise DimensionMismatch(f"Incompatible channel {h.shape} and received vector {y.shape}.")
    var = np.zeros(h.shape[0]) if noise_var is None else np.asarray(noise_var, dtype=np.float64)
    var = np.broadcast_to(var, (h.shape[0],)).astype(np.float64)
    return h, y, var, single


def finish(
    llrs: np.ndarray, hard_bits: np.ndarray, hard_symbols: np.ndarray, name: str, single: bool
) -> DetectionResult:
    """Monta o `DetectionResult`, removendo o eixo de lote quando a entrada era um único RE."""
    if single:
        llrs, hard_bits, hard_symbols = llrs[0], hard_bits[0], hard_symbols[0]
    return DetectionResult(
        llrs=llrs,
        hard_bits=hard_bits.astype(np.uint8),
        hard_symbols=hard_symbols,
        detector_name=name,
    )


class Detector(ABC):
    """
    Interface comum dos detectores usados pelo harness.

    Cada implementação recebe um lote de REs e devolve um `DetectionResult` com LLRs,
    bits e símbolos decididos por camada.

    Attributes
    ----------
    name : str
        Rótulo estável usado nos arquivos de resultado.
    res_per_call : int
        Múltiplo de REs que cada chamada de `detect` precisa receber (1 para detectores por RE).

    Examples
    --------
    >>> class Nulo(Detector):
    ...     name = "nulo"
    ...
    ...     def detect(self, h_est, y, noise_var, c, h_true=None):
    ...         raise NotImplementedError
    >>> Nulo().name
    'nulo'
    """

    name: str = "detector"
    res_per_call: int = 1

    def check(self, n_rx: int, n_tx: int, c: Constellation) -> None:
        """Valida o cenário antes da simulação; levanta o mesmo erro que `detect` levantaria."""

    @abstractmethod
    def detect(
        self,
        h_est: np.ndarray,
        y: np.ndarray,
        noise_var,
        c: Constellation,
        h_true: np.ndarray | None = None,
    ) -> DetectionResult:
        """
        Detecta os símbolos transmitidos.

        Parameters
        ----------
        h_est : np.ndarray
            Canal estimado ``(B, N_r, N_t)``.
        y : np.ndarray
            Sinal recebido ``(B, N_r)``.
        noise_var : array_like
            ``σ²`` por RE.
        c : Constellation
            Constelação usada por todas as camadas.
        h_true : np.ndarray or None, optional
            Canal verdadeiro, usado apenas por referências com CSI ideal.
        """
        raise NotImplementedError("Subclasses devem implementar detect()")
