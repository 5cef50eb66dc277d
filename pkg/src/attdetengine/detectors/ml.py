import itertools

import numpy as np

from attdetengine.detectors.base import LLR_VAR_FLOOR, DetectionResult, Detector, as_batch, finish
from attdetengine.exceptions import SearchSpaceTooLarge
from attdetengine.modem.constellation import LLR_CLIP_DEFAULT, Constellation

ENUMERATION_CAP = 1_000_000
_WORK_BUDGET = 4_000_000


def enumerate_candidates(c: Constellation, n_tx: int) -> np.ndarray:
    """
    Todos os vetores de índices de pontos em ``X^{N_t}``, em ordem lexicográfica.

    Examples
    --------
    >>> from attdetengine.modem.constellation import build_constellation
    >>> enumerate_candidates(build_constellation(4), 2).shape
    (16, 2)
    """
    return np.array(list(itertools.product(range(c.order), repeat=n_tx)), dtype=np.int64)


def maxlog_from_candidates(
    metrics: np.ndarray, cand_bits: np.ndarray, noise_var: np.ndarray, clip: float
) -> np.ndarray:
    """
    LLRs max-log a partir de uma lista de candidatos e suas métricas.

    Parameters
    ----------
    metrics : np.ndarray
        ``(B, S)`` distâncias ``‖y − Ĥx‖²``.
    cand_bits : np.ndarray
        ``(B, S, N_t, m)`` ou ``(S, N_t, m)`` bits de cada candidato.
    noise_var : np.ndarray
        ``(B,)``.
    clip : float
        Saturação; uma hipótese ausente na lista gera ``±clip``.

    Returns
    -------
    np.ndarray
        ``(B, N_t, m)``.
    """
    bits = np.broadcast_to(cand_bits.astype(bool), metrics.shape + cand_bits.shape[-2:])
    expanded = metrics[:, :, None, None]
    min_one = np.where(bits, expanded, np.inf).min(axis=1)
    min_zero = np.where(~bits, expanded, np.inf).min(axis=1)
    llr = (min_zero - min_one) / np.maximum(noise_var, LLR_VAR_FLOOR)[:, None, None]
    return np.clip(llr, -clip, clip)


def detect_ml(
    h_est,
    y,
    c: Constellation,
    noise_var=1.0,
    clip: float = LLR_CLIP_DEFAULT,
    cap: int = ENUMERATION_CAP,
) -> DetectionResult:
    """
    Detecção de máxima verossimilhança por busca exaustiva em ``X^{N_t}``.

    A decisão abrupta minimiza ``‖y − Ĥx‖₂`` e não depende de ``σ²``; ``σ²`` apenas escala as
    LLRs max-log calculadas sobre a enumeração completa.

    Parameters
    ----------
    h_est, y : np.ndarray
        Um RE ou um lote.
    c : Constellation
        Constelação.
    noise_var : float or np.ndarray, optional
        ``σ²`` para escalar as LLRs.
    clip : float, optional
        Saturação das LLRs.
    cap : int, optional
        Limite de ``M^{N_t}``.

    Raises
    ------
    SearchSpaceTooLarge
        Se ``M^{N_t} > cap``.
    """
    h, y, var, single = as_batch(h_est, y, noise_var)
    n_tx = h.shape[-1]
    size = c.order**n_tx
    if size > cap:
        raise SearchSpaceTooLarge(f"ML search over {c.order}^{n_tx} = {size} exceeds cap {cap}.")

    cand = enumerate_candidates(c, n_tx)
    cand_symbols = c.points[cand]
    cand_bits = c.labels[cand]
    batch = h.shape[0]
    step = max(1, _WORK_BUDGET // (size * h.shape[1] * max(1, n_tx)))

    llrs = np.empty((batch, n_tx, c.bits_per_symbol))
    best = np.empty(batch, dtype=np.int64)
    for start in range(0, batch, step):
        sl = slice(start, start + step)
        received = np.einsum("brn,cn->bcr", h[sl], cand_symbols)
        metrics = np.sum(np.abs(y[sl, None, :] - received) ** 2, axis=-1)
        best[sl] = np.argmin(metrics, axis=1)
        llrs[sl] = maxlog_from_candidates(metrics, cand_bits, var[sl], clip)

    return finish(llrs, cand_bits[best], cand_symbols[best], "ml", single)


class MlDetector(Detector):
    name = "ml"

    def __init__(self, clip: float = LLR_CLIP_DEFAULT, cap: int = ENUMERATION_CAP) -> None:
        self.clip = clip
        self.cap = cap

    def check(self, n_rx: int, n_tx: int, c: Constellation) -> None:
        if c.order**n_tx > self.cap:
            raise SearchSpaceTooLarge(f"ML search over {c.order}^{n_tx} exceeds cap {self.cap}.")

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        return detect_ml(h_est, y, c, noise_var, self.clip, self.cap)
