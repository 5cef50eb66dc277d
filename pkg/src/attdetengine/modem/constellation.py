"""
Constelações QAM quadradas com rotulagem Gray por eixo, mapeamento de bits, decisão abrupta e
LLRs max-log.

A energia média dos símbolos é 1. Os primeiros ``log2(M) / 2`` bits rotulam o eixo I e os
demais o eixo Q, do mais para o menos significativo.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from attdetengine.config.logger import LogFactory
from attdetengine.exceptions import LengthMismatch, UnsupportedOrder

logger = LogFactory.get_logger("Modem")

SUPPORTED_ORDERS = (4, 16, 64)
LLR_CLIP_DEFAULT = 20.0

SoftBits = np.ndarray


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Constellation:
    """
    Constelação QAM quadrada com rótulos Gray e potência média unitária.

    Os pontos são indexados pelo valor inteiro do rótulo: ``points[l]`` é o símbolo cujo rótulo
    binário (MSB primeiro) é ``labels[l]``. Cada eixo usa um código Gray refletido
    independente; os bits do eixo I vêm primeiro, seguidos pelos do eixo Q.

    Attributes
    ----------
    order : int
        Número de pontos M.
    bits_per_symbol : int
        ``log2(M)``.
    points : np.ndarray
        Pontos complexos, shape ``(M,)``.
    labels : np.ndarray
        Rótulos binários, shape ``(M, bits_per_symbol)``, dtype ``uint8``.
    axis_levels : np.ndarray
        Amplitudes normalizadas de um eixo, em ordem crescente, shape ``(sqrt(M),)``.
    axis_labels : np.ndarray
        Bits Gray de cada amplitude, shape ``(sqrt(M), bits_per_symbol // 2)``.
    """

    order: int
    bits_per_symbol: int
    points: np.ndarray
    labels: np.ndarray
    axis_levels: np.ndarray
    axis_labels: np.ndarray

    @property
    def bits_per_axis(self) -> int:
        return self.bits_per_symbol // 2


def _int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values)[..., None] >> shifts) & 1).astype(np.uint8)


def _bits_to_int(bits: np.ndarray) -> np.ndarray:
    width = bits.shape[-1]
    weights = 1 << np.arange(width - 1, -1, -1)
    return (np.asarray(bits, dtype=np.int64) * weights).sum(axis=-1)


@lru_cache(maxsize=None)
def build_constellation(order: int) -> Constellation:
    """
    Constrói a constelação QAM quadrada de ordem `order`.

    Parameters
    ----------
    order : int
        4 (QPSK), 16 ou 64.

    Returns
    -------
    Constellation
        Constelação imutável (o resultado é memoizado e pode ser compartilhado entre threads).

    Raises
    ------
    UnsupportedOrder
        Se `order` não estiver em {4, 16, 64}.

    Examples
    --------
    >>> c = build_constellation(16)
    >>> c.bits_per_symbol
    4
    >>> round(float(np.mean(np.abs(c.points) ** 2)), 12)
    1.0
    """
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrder(f"Unsupported modulation order {order}; use one of {SUPPORTED_ORDERS}.")
    bits_per_symbol = int(np.log2(order))
    half = bits_per_symbol // 2
    n_levels = 1 << half
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    levels = (2.0 * np.arange(n_levels) - (n_levels - 1)) / scale

    level_index = np.arange(n_levels)
    gray = level_index ^ (level_index >> 1)
    level_of_gray = np.empty(n_levels, dtype=np.int64)
    level_of_gray[gray] = level_index

    label_ints = np.arange(order)
    i_levels = level_of_gray[label_ints >> half]
    q_levels = level_of_gray[label_ints & (n_levels - 1)]
    points = levels[i_levels] + 1j * levels[q_levels]

    logger.debug("Built %d-QAM constellation (%d bits/symbol).", order, bits_per_symbol)
    return Constellation(
        order=order,
        bits_per_symbol=bits_per_symbol,
        points=_frozen(points.astype(np.complex128)),
        labels=_frozen(_int_to_bits(label_ints, bits_per_symbol)),
        axis_levels=_frozen(levels),
        axis_labels=_frozen(_int_to_bits(gray, half)),
    )


def map_bits(bits, c: Constellation) -> np.ndarray:
    """
    Mapeia bits em símbolos, ``bits_per_symbol`` bits por símbolo (MSB primeiro).

    Parameters
    ----------
    bits : array_like
        Bits 0/1; o último eixo é agrupado em símbolos.
    c : Constellation
        Constelação de destino.

    Returns
    -------
    np.ndarray
        Símbolos complexos, último eixo com ``len(bits) // bits_per_symbol`` elementos.

    Raises
    ------
    LengthMismatch
        Se o comprimento do último eixo não for múltiplo de ``bits_per_symbol``.

    Examples
    --------
    >>> qpsk = build_constellation(4)
    >>> s = map_bits([1, 1, 0, 0], qpsk)
    >>> bool(np.allclose(s * np.sqrt(2), [1 + 1j, -1 - 1j]))
    True
    """
    bits = np.asarray(bits, dtype=np.uint8)
    m = c.bits_per_symbol
    if bits.shape[-1] % m != 0:
        raise LengthMismatch(f"{bits.shape[-1]} bits is not a multiple of {m} bits per symbol.")
    grouped = bits.reshape(*bits.shape[:-1], bits.shape[-1] // m, m)
    return c.points[_bits_to_int(grouped)]


def hard_demap(s, c: Constellation) -> np.ndarray:
    """
    Decisão abrupta: rótulo do ponto mais próximo (empates vão para o menor rótulo).

    Parameters
    ----------
    s : array_like
        Símbolo(s) complexo(s), qualquer shape.
    c : Constellation
        Constelação de referência.

    Returns
    -------
    np.ndarray
        Bits, shape ``s.shape + (bits_per_symbol,)``.

    Examples
    --------
    >>> hard_demap(3 + 3j, build_constellation(4)).tolist()
    [1, 1]
    """
    s = np.asarray(s, dtype=np.complex128)
    dist = np.abs(s[..., None] - c.points) ** 2
    return c.labels[np.argmin(dist, axis=-1)]


def maxlog_llr(z, gain, var, c: Constellation, clip: float = LLR_CLIP_DEFAULT) -> SoftBits:
    """
    LLRs max-log para a observação escalar ``z = gain * s + ruído``.

    ``ℓ_k = (min_{s: b_k=0} |z − gain·s|² − min_{s: b_k=1} |z − gain·s|²) / var``, saturado em
    ``±clip``. Convenção de sinal: ``ℓ = log(P(b=1) / P(b=0))``.

    Parameters
    ----------
    z : array_like
        Observações complexas.
    gain : array_like
        Ganho real positivo (broadcast com `z`).
    var : array_like
        Variância efetiva positiva (broadcast com `z`).
    c : Constellation
        Constelação.
    clip : float, optional
        Saturação das LLRs.

    Returns
    -------
    SoftBits
        LLRs, shape ``broadcast(z, gain, var).shape + (bits_per_symbol,)``.

    Examples
    --------
    >>> qpsk = build_constellation(4)
    >>> llr = maxlog_llr((1 + 1j) / np.sqrt(2), 1.0, 0.1, qpsk)
    >>> bool(np.all(llr > 0))
    True
    """
    z, gain, var = np.broadcast_arrays(
        np.asarray(z, dtype=np.complex128),
        np.asarray(gain, dtype=np.float64),
        np.asarray(var, dtype=np.float64),
    )
    dist = np.abs(z[..., None] - gain[..., None] * c.points) ** 2
    bit_is_one = c.labels.T.astype(bool)
    masked = dist[..., None, :]
    min_one = np.where(bit_is_one, masked, np.inf).min(axis=-1)
    min_zero = np.where(~bit_is_one, masked, np.inf).min(axis=-1)
    llr = (min_zero - min_one) / var[..., None]
    return np.clip(llr, -clip, clip)
