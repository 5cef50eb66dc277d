import numpy as np

from attdetengine.detectors.base import (
    LLR_VAR_FLOOR,
    DetectionResult,
    Detector,
    as_batch,
    finish,
)
from attdetengine.exceptions import DegenerateColumn, DimensionMismatch
from attdetengine.linalg.complex_linalg import hermitian, pseudo_inverse, solve_hpd
from attdetengine.modem.constellation import (
    LLR_CLIP_DEFAULT,
    Constellation,
    hard_demap,
    maxlog_llr,
)

COLUMN_NORM_EPS = 1e-12


def _nearest_points(z: np.ndarray, c: Constellation) -> tuple[np.ndarray, np.ndarray]:
    bits = hard_demap(z, c)
    idx = np.argmin(np.abs(z[..., None] - c.points) ** 2, axis=-1)
    return bits, c.points[idx]


def mmse_filter(h, noise_var) -> np.ndarray:
    """
    Filtro MMSE ``W = (ĤᴴĤ + σ²I)⁻¹Ĥᴴ`` via Cholesky.

    Parameters
    ----------
    h : np.ndarray
        ``(N_r, N_t)`` ou ``(B, N_r, N_t)``.
    noise_var : float or np.ndarray
        ``σ² > 0`` (escalar ou ``(B,)``).

    Returns
    -------
    np.ndarray
        ``(N_t, N_r)`` ou ``(B, N_t, N_r)``.

    Examples
    --------
    >>> w = mmse_filter(np.eye(2), 1.0)
    >>> bool(np.allclose(w, 0.5 * np.eye(2)))
    True
    """
    h = np.asarray(h, dtype=np.complex128)
    hh = hermitian(h)
    n_tx = h.shape[-1]
    var = np.asarray(noise_var, dtype=np.float64)
    reg = var[..., None, None] * np.eye(n_tx) if var.ndim else var * np.eye(n_tx)
    return solve_hpd(hh @ h + reg, hh)


def detect_zf(h_est, y, c: Constellation, noise_var=0.0, clip: float = LLR_CLIP_DEFAULT) -> DetectionResult:
    """
    Zero-forcing: ``x̃ = W_ZF y`` com LLRs max-log por camada.

    A variância por camada é ``σ²·[(ĤᴴĤ)⁻¹]_ii``, calculada como ``σ²‖W_i‖²`` (pois
    ``W Wᴴ = (ĤᴴĤ)⁻¹``).

    Raises
    ------
    RankDeficient
        Se ``Ĥ`` não tiver posto coluna completo.
    """
    h, y, var, single = as_batch(h_est, y, noise_var)
    w = pseudo_inverse(h)
    x_tilde = np.einsum("bnr,br->bn", w, y)
    layer_var = var[:, None] * np.sum(np.abs(w) ** 2, axis=-1)
    llrs = maxlog_llr(x_tilde, 1.0, np.maximum(layer_var, LLR_VAR_FLOOR), c, clip)
    bits, symbols = _nearest_points(x_tilde, c)
    return finish(llrs, bits, symbols, "zf", single)


def detect_mmse(h_est, y, noise_var, c: Constellation, clip: float = LLR_CLIP_DEFAULT) -> DetectionResult:
    """
    MMSE com correção de viés e LLRs max-log.

    Com ``A = WĤ``: viés ``μ_i = A_ii`` e variância efetiva
    ``ν_i = Σ_{j≠i} |A_ij|² + σ²‖W_i‖²``; as LLRs usam ``maxlog_llr(z_i, μ_i, ν_i)``.

    Raises
    ------
    NotPositiveDefinite
        Se ``ĤᴴĤ + σ²I`` não for positiva definida.
    """
    h, y, var, single = as_batch(h_est, y, noise_var)
    if np.any(var <= 0.0):
        raise ValueError("MMSE detection needs noise_var > 0.")
    w = mmse_filter(h, var)
    z = np.einsum("bnr,br->bn", w, y)
    a = w @ h
    bias = np.real(np.diagonal(a, axis1=-2, axis2=-1))
    interference = np.sum(np.abs(a) ** 2, axis=-1) - np.abs(np.diagonal(a, axis1=-2, axis2=-1)) ** 2
    eff_var = interference + var[:, None] * np.sum(np.abs(w) ** 2, axis=-1)
    llrs = maxlog_llr(z, bias, np.maximum(eff_var, LLR_VAR_FLOOR), c, clip)
    bits, symbols = _nearest_points(z / bias, c)
    return finish(llrs, bits, symbols, "mmse", single)


def matched_filter_outputs(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Saída do filtro casado normalizado por camada, ``ĥᵢᴴy / ‖ĥᵢ‖²``, em lote.

    Raises
    ------
    DegenerateColumn
        Se alguma coluna tiver norma ao quadrado ``<= 1e-12``.
    """
    norms = np.sum(np.abs(h) ** 2, axis=-2)
    if np.any(norms <= COLUMN_NORM_EPS):
        raise DegenerateColumn("Channel column with (near) zero norm.")
    return np.einsum("brn,br->bn", h.conj(), y) / norms


def detect_mf(h_est, y, noise_var, c: Constellation, clip: float = LLR_CLIP_DEFAULT) -> DetectionResult:
    """
    Filtro casado por camada (sem cancelamento de interferência).

    A variância efetiva soma a interferência das outras camadas (símbolos de potência unitária)
    e o ruído filtrado: ``Σ_{j≠i}|ĥᵢᴴĥⱼ|²/‖ĥᵢ‖⁴ + σ²/‖ĥᵢ‖²``.
    """
    h, y, var, single = as_batch(h_est, y, noise_var)
    u = matched_filter_outputs(h, y)
    norms = np.sum(np.abs(h) ** 2, axis=-2)
    gram = np.abs(hermitian(h) @ h) ** 2
    cross = (np.sum(gram, axis=-1) - norms**2) / norms**2
    eff_var = cross + var[:, None] / norms
    llrs = maxlog_llr(u, 1.0, np.maximum(eff_var, LLR_VAR_FLOOR), c, clip)
    bits, symbols = _nearest_points(u, c)
    return finish(llrs, bits, symbols, "mf", single)


class ZeroForcingDetector(Detector):
    name = "zf"

    def __init__(self, clip: float = LLR_CLIP_DEFAULT) -> None:
        self.clip = clip

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        return detect_zf(h_est, y, c, noise_var, self.clip)


class MmseDetector(Detector):
    """
    Detector MMSE; com ``ideal_csi=True`` usa o canal verdadeiro (curva de referência).
    """

    def __init__(self, clip: float = LLR_CLIP_DEFAULT, *, ideal_csi: bool = False) -> None:
        self.clip = clip
        self.ideal_csi = ideal_csi
        self.name = "mmse_ideal" if ideal_csi else "mmse"

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        if self.ideal_csi:
            if h_true is None:
                raise DimensionMismatch("mmse_ideal needs the true channel.")
            h_est = h_true
        result = detect_mmse(h_est, y, noise_var, c, self.clip)
        return DetectionResult(result.llrs, result.hard_bits, result.hard_symbols, self.name)


class MatchedFilterDetector(Detector):
    name = "mf"

    def __init__(self, clip: float = LLR_CLIP_DEFAULT) -> None:
        self.clip = clip

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        return detect_mf(h_est, y, noise_var, c, self.clip)
