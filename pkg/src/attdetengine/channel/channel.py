"""Canal MIMO plano por RE: Rayleigh i.i.d., Kronecker e AWGN, ruído e erro de estimação."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from attdetengine.channel.rng import BIT_GENERATORS, DEFAULT_GENERATOR
from attdetengine.exceptions import ConfigError, DimensionMismatch

CHANNEL_MODELS = ("iid", "kronecker", "awgn")


@dataclass(frozen=True)
class ChannelConfig:
    """
    Parâmetros do canal MIMO plano por RE.

    Attributes
    ----------
    n_rx : int
        Antenas de recepção ``N_r``.
    n_tx : int
        Camadas / antenas de transmissão ``N_t``.
    model : str
        ``"iid"`` (Rayleigh i.i.d.), ``"kronecker"`` (correlação exponencial separável) ou
        ``"awgn"`` (canal identidade).
    rho_tx, rho_rx : float
        Coeficientes de correlação exponencial, em ``[0, 1)``.
    csi_error_var : float
        Variância ``σ_e²`` do erro aditivo de estimação do canal.
    seed : int
        Semente do experimento.
    rng : str
        Nome do gerador (``"philox"`` ou ``"pcg64"``).
    """

    n_rx: int = 8
    n_tx: int = 2
    model: str = "iid"
    rho_tx: float = 0.0
    rho_rx: float = 0.0
    csi_error_var: float = 0.0
    seed: int = 0
    rng: str = DEFAULT_GENERATOR

    def __post_init__(self) -> None:
        if not (self.n_rx >= self.n_tx >= 1):
            raise ConfigError(f"Need n_rx >= n_tx >= 1, got n_rx={self.n_rx}, n_tx={self.n_tx}.")
        if self.model not in CHANNEL_MODELS:
            raise ConfigError(f"Unknown channel model '{self.model}'; use one of {CHANNEL_MODELS}.")
        for name in ("rho_tx", "rho_rx"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1), got {value}.")
        if self.csi_error_var < 0.0:
            raise ConfigError(f"csi_error_var must be >= 0, got {self.csi_error_var}.")
        if self.rng not in BIT_GENERATORS:
            raise ConfigError(f"Unknown RNG '{self.rng}'; use one of {sorted(BIT_GENERATORS)}.")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Canal verdadeiro ``H``, estimativa ``Ĥ`` e variância de ruído ``σ²`` de um lote de REs."""

    h_true: np.ndarray
    h_est: np.ndarray
    noise_var: np.ndarray


def exponential_correlation_root(rho: float, n: int) -> np.ndarray:
    """
    Fator de Cholesky ``L`` de ``R[i, j] = rho^|i-j|`` (``R = L Lᵀ``).

    Examples
    --------
    >>> exponential_correlation_root(0.0, 2).tolist()
    [[1.0, 0.0], [0.0, 1.0]]
    """
    corr = scipy.linalg.toeplitz(rho ** np.arange(n, dtype=np.float64))
    return scipy.linalg.cholesky(corr, lower=True)


def _complex_gaussian(rng: np.random.Generator, shape: tuple[int, ...], var: float = 1.0) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channel(cfg: ChannelConfig, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """
    Sorteia realizações do canal ``H``.

    Parameters
    ----------
    cfg : ChannelConfig
        Configuração do canal.
    rng : np.random.Generator
        Fluxo aleatório.
    size : int or None, optional
        Número de REs. Se None, retorna uma única matriz ``N_r x N_t``.

    Returns
    -------
    np.ndarray
        ``(N_r, N_t)`` ou ``(size, N_r, N_t)``, dtype ``complex128``.

    Notes
    -----
    ``kronecker``: ``H = L_rx G L_txᵀ`` com ``G`` i.i.d. CN(0, 1) e ``L`` o fator de Cholesky da
    correlação exponencial. Com ``rho = 0`` os fatores são a identidade e o resultado coincide
    bit a bit com o modo ``iid`` no mesmo fluxo.
    """
    shape = (cfg.n_rx, cfg.n_tx) if size is None else (size, cfg.n_rx, cfg.n_tx)
    if cfg.model == "awgn":
        return np.broadcast_to(np.eye(cfg.n_rx, cfg.n_tx, dtype=np.complex128), shape).copy()
    g = _complex_gaussian(rng, shape)
    if cfg.model == "iid":
        return g
    l_rx = exponential_correlation_root(cfg.rho_rx, cfg.n_rx)
    l_tx = exponential_correlation_root(cfg.rho_tx, cfg.n_tx)
    return l_rx @ g @ l_tx.T


def snr_to_noise_var(snr_db, n_tx: int):
    """
    Variância do ruído para uma SNR por antena de recepção.

    Com símbolos de potência unitária e entradas de canal de variância unitária, a potência
    de sinal por antena é ``N_t``; logo ``σ² = N_t · 10^(−snr_db/10)``.

    Examples
    --------
    >>> snr_to_noise_var(0.0, 2)
    2.0
    """
    value = n_tx * 10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0)
    return float(value) if value.ndim == 0 else value


def apply_channel(h, x, noise_var, rng: np.random.Generator) -> np.ndarray:
    """
    Aplica ``y = Hx + n`` com ``n ~ CN(0, σ²I)``.

    Parameters
    ----------
    h : np.ndarray
        ``(N_r, N_t)`` ou ``(B, N_r, N_t)``.
    x : np.ndarray
        ``(N_t,)`` ou ``(B, N_t)``.
    noise_var : float or np.ndarray
        ``σ² >= 0``, escalar ou ``(B,)``.
    rng : np.random.Generator
        Fluxo aleatório (o ruído é sempre sorteado, mesmo com ``σ² = 0``, para manter os fluxos
        alinhados).

    Returns
    -------
    np.ndarray
        ``y`` com shape ``(N_r,)`` ou ``(B, N_r)``.
    """
    h = np.asarray(h, dtype=np.complex128)
    x = np.asarray(x, dtype=np.complex128)
    if h.shape[-1] != x.shape[-1]:
        raise DimensionMismatch(f"Channel has {h.shape[-1]} columns but x has {x.shape[-1]} layers.")
    clean = np.einsum("...rn,...n->...r", h, x)
    var = np.asarray(noise_var, dtype=np.float64)
    if np.any(var < 0.0):
        raise ValueError("noise_var must be >= 0.")
    noise = _complex_gaussian(rng, clean.shape)
    scale = np.sqrt(var)[..., None] if var.ndim else np.sqrt(var)
    return clean + scale * noise


def perturb_csi(h, csi_error_var: float, rng: np.random.Generator) -> np.ndarray:
    """
    Emula estimação imperfeita: ``Ĥ = H + E`` com ``E`` i.i.d. CN(0, σ_e²).

    O erro é sempre sorteado (fluxos alinhados entre configurações); com ``σ_e² = 0`` o
    resultado é igual a ``H``.
    """
    h = np.asarray(h, dtype=np.complex128)
    if csi_error_var < 0.0:
        raise ValueError("csi_error_var must be >= 0.")
    error = _complex_gaussian(rng, h.shape)
    if csi_error_var == 0.0:
        return h.copy()
    return h + np.sqrt(csi_error_var) * error


def draw_realization(
    cfg: ChannelConfig, noise_var, rng: np.random.Generator, size: int
) -> ChannelRealization:
    """Sorteia ``H`` e ``Ĥ`` para `size` REs, na ordem fixa canal → erro de CSI."""
    h_true = sample_channel(cfg, rng, size)
    h_est = perturb_csi(h_true, cfg.csi_error_var, rng)
    var = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), (size,)).copy()
    return ChannelRealization(h_true=h_true, h_est=h_est, noise_var=var)
