import numpy as np
from scipy.special import expit

from attdetengine.exceptions import DimensionMismatch, EmptyMask


def bit_mask(bits_per_symbol, n_layers: int, max_bits: int) -> np.ndarray:
    """
    Máscara ``(B, N_t, max_bits)`` que ativa os primeiros ``bits_per_symbol[b]`` bits de cada token.

    Examples
    --------
    >>> bit_mask(np.array([2, 4]), 1, 4).astype(int).tolist()
    [[[1, 1, 0, 0]], [[1, 1, 1, 1]]]
    """
    bps = np.atleast_1d(np.asarray(bits_per_symbol, dtype=np.int64))
    active = np.arange(max_bits) < bps[:, None]
    return np.broadcast_to(active[:, None, :], (bps.size, n_layers, max_bits)).copy()


def bce_loss(logits, bits, mask) -> tuple[float, np.ndarray]:
    """
    Entropia cruzada binária média sobre os bits ativos, a partir de logits.

    Usa a forma estável ``max(ℓ, 0) − ℓ·b + log(1 + exp(−|ℓ|))``; o gradiente é
    ``(σ(ℓ) − b) / n_ativos`` nos bits ativos e exatamente zero nos mascarados.

    Parameters
    ----------
    logits : array_like
        Logits (convenção ``log(P(1)/P(0))``).
    bits : array_like
        Rótulos em {0, 1}, mesmo shape.
    mask : array_like
        Booleano, mesmo shape; ``True`` marca os bits que entram na perda.

    Returns
    -------
    tuple[float, np.ndarray]
        Perda média e ``∂perda/∂logits``.

    Raises
    ------
    DimensionMismatch
        Se os shapes diferirem.
    EmptyMask
        Se nenhum bit estiver ativo.

    Examples
    --------
    >>> loss, grad = bce_loss(np.zeros(4), np.array([0, 1, 0, 1]), np.ones(4, dtype=bool))
    >>> round(loss, 12) == round(float(np.log(2.0)), 12)
    True
    >>> grad.tolist()
    [0.125, -0.125, 0.125, -0.125]
    """
    logits = np.asarray(logits, dtype=np.float64)
    bits = np.asarray(bits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != bits.shape or logits.shape != mask.shape:
        raise DimensionMismatch(f"logits {logits.shape}, bits {bits.shape} and mask {mask.shape} differ.")
    count = int(mask.sum())
    if count == 0:
        raise EmptyMask("No active bits in the loss mask.")
    per_bit = np.maximum(logits, 0.0) - logits * bits + np.log1p(np.exp(-np.abs(logits)))
    loss = float(np.sum(np.where(mask, per_bit, 0.0)) / count)
    grad = np.where(mask, (expit(logits) - bits) / count, 0.0)
    return loss, grad
