from dataclasses import dataclass

import numpy as np

from attdetengine.config.logger import LogFactory
from attdetengine.detectors.base import DetectionResult, Detector, as_batch, finish
from attdetengine.detectors.ml import maxlog_from_candidates
from attdetengine.exceptions import ConfigError
from attdetengine.linalg.complex_linalg import pivoted_qr, real_expansion, real_vector
from attdetengine.modem.constellation import LLR_CLIP_DEFAULT, Constellation

logger = LogFactory.get_logger("KBest")


@dataclass(frozen=True)
class KBestConfig:
    """
    Parâmetros da busca K-best.

    Attributes
    ----------
    k : int
        Tamanho da lista de sobreviventes por nível.
    llr_clip : float
        Saturação das LLRs (também usada para hipóteses ausentes da lista final).
    """

    k: int = 64
    llr_clip: float = LLR_CLIP_DEFAULT

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigError(f"K-best list size must be >= 1, got {self.k}.")
        if self.llr_clip <= 0.0:
            raise ConfigError(f"llr_clip must be > 0, got {self.llr_clip}.")


def sorted_real_qr(h: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    QR ordenada da expansão real: diagonal de R decrescente (pivoteamento de colunas).

    Parameters
    ----------
    h : np.ndarray
        ``(B, N_r, N_t)`` complexo.
    y : np.ndarray
        ``(B, N_r)`` complexo.

    Returns
    -------
    tuple
        ``(q (B, 2N_r, 2N_t), r (B, 2N_t, 2N_t), perm (B, 2N_t), y_rot (B, 2N_t))`` onde
        ``perm[b, j]`` é a coluna real original na posição ``j`` e ``y_rot = Qᵀ y_r``.

    Raises
    ------
    RankDeficient
        Se a expansão real não tiver posto completo.
    """
    q, r, perm = pivoted_qr(real_expansion(h))
    y_real = real_vector(y)
    y_rot = np.einsum("bri,br->bi", q, y_real)
    return q, r, perm, y_rot


def detect_kbest(
    h_est, y, noise_var, c: Constellation, cfg: KBestConfig | None = None
) -> DetectionResult:
    """
    Busca em largura K-best sobre a decomposição real.

    Cada um dos ``2N_t`` níveis enumera todas as amplitudes reais de um eixo; a cada nível só
    os `k` caminhos parciais de menor métrica sobrevivem. A melhor folha dá a decisão abrupta e
    a lista final dá LLRs max-log; uma hipótese de bit ausente na lista é saturada em
    ``±llr_clip``.

    Parameters
    ----------
    h_est, y : np.ndarray
        Um RE ou um lote.
    noise_var : float or np.ndarray
        ``σ²`` para escalar as LLRs.
    c : Constellation
        Constelação.
    cfg : KBestConfig, optional
        Largura da lista e saturação.

    Raises
    ------
    RankDeficient
        Se a expansão real do canal não tiver posto completo.
    """
    cfg = cfg or KBestConfig()
    h, y, var, single = as_batch(h_est, y, noise_var)
    batch, _, n_tx = h.shape
    n_real = 2 * n_tx
    levels = c.axis_levels
    n_levels = levels.size
    width = min(cfg.k, c.order**n_tx)

    _, r, perm, y_rot = sorted_real_qr(h, y)
    const = np.sum(np.abs(y) ** 2, axis=-1) - np.sum(y_rot**2, axis=-1)

    metrics = np.zeros((batch, 1))
    chosen = np.zeros((batch, 1, n_real), dtype=np.int64)
    values = np.zeros((batch, 1, n_real))
    rows = np.arange(batch)[:, None]
    for n in range(n_real - 1, -1, -1):
        interference = np.einsum("bj,bsj->bs", r[:, n, n + 1 :], values[:, :, n + 1 :])
        target = (y_rot[:, n, None] - interference)[:, :, None]
        residual = target - r[:, n, n, None, None] * levels
        child = (metrics[:, :, None] + residual**2).reshape(batch, -1)
        keep = min(width, child.shape[1])
        order = np.argsort(child, axis=1, kind="stable")[:, :keep]
        parent, level = np.divmod(order, n_levels)
        metrics = child[rows, order]
        chosen = chosen[rows, parent]
        values = values[rows, parent]
        chosen[:, :, n] = level
        values[:, :, n] = levels[level]

    inverse = np.argsort(perm, axis=-1)
    chosen = np.take_along_axis(chosen, inverse[:, None, :], axis=2)
    metrics = metrics + const[:, None]

    i_idx, q_idx = chosen[..., :n_tx], chosen[..., n_tx:]
    cand_bits = np.concatenate([c.axis_labels[i_idx], c.axis_labels[q_idx]], axis=-1)
    cand_symbols = levels[i_idx] + 1j * levels[q_idx]

    best = np.argmin(metrics, axis=1)
    llrs = maxlog_from_candidates(metrics, cand_bits, var, cfg.llr_clip)
    hard_bits = cand_bits[np.arange(batch), best]
    hard_symbols = cand_symbols[np.arange(batch), best]
    return finish(llrs, hard_bits, hard_symbols, f"kbest({cfg.k})", single)


class KBestDetector(Detector):
    def __init__(self, cfg: KBestConfig) -> None:
        self.cfg = cfg
        self.name = f"kbest({cfg.k})"
        logger.debug("K-best detector ready with k=%d.", cfg.k)

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        return detect_kbest(h_est, y, noise_var, c, self.cfg)
