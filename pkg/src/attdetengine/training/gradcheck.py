"""
Verificação do backward contra diferenças finitas centrais.

O erro relativo por coordenada é ``|a − b| / (|a| + |b| + 1e-12)``. Perto de um "joelho" de
ReLU a diferença central mistura dois ramos lineares; cada avaliação registra o padrão de
ativação de todas as ReLUs e, quando ele muda dentro do passo, a derivada numérica é refeita
com passo menor ou com uma fórmula unilateral de segunda ordem do lado que não cruzou.
"""

from dataclasses import dataclass

import numpy as np

from attdetengine.attdet.params import ArchConfig, ModelParams, init_params
from attdetengine.channel.channel import ChannelConfig
from attdetengine.channel.rng import make_rng
from attdetengine.config.logger import LogFactory
from attdetengine.exceptions import ConfigError
from attdetengine.training.backprop import backward, batch_loss
from attdetengine.training.batch import TrainingBatch, generate_batch

logger = LogFactory.get_logger("GradCheck")

GRADCHECK_THRESHOLD = 1e-4
SUBSET_THRESHOLD = 10_000
SUBSET_SIZE = 1000
MAX_PARAMS = 50_000
_STEP_SHRINK = (1.0, 0.25, 0.0625)


@dataclass(frozen=True)
class GradCheckReport:
    """
    Resultado de uma verificação de gradientes.

    Attributes
    ----------
    max_rel_error : float
        Maior erro relativo entre as coordenadas verificadas.
    worst_param : str
        Tensor que contém a pior coordenada.
    n_checked : int
        Coordenadas verificadas.
    n_params : int
        Total de parâmetros.
    n_kinks : int
        Coordenadas em que o passo cruzou um joelho de ReLU.
    """

    max_rel_error: float
    worst_param: str
    n_checked: int
    n_params: int
    n_kinks: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error < GRADCHECK_THRESHOLD


def relative_error(a, b) -> np.ndarray:
    """
    Examples
    --------
    >>> float(relative_error(1.0, 1.0))
    0.0
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-12)


class _Objective:
    """Perda do lote como função do vetor achatado, com o padrão de ReLUs da avaliação."""

    def __init__(self, batch: TrainingBatch, arch: ArchConfig, n_rx: int) -> None:
        self.batch = batch
        self.arch = arch
        self.n_rx = n_rx

    def __call__(self, theta: np.ndarray) -> tuple[float, list[np.ndarray]]:
        params = ModelParams.unflatten(theta, self.arch, self.n_rx)
        loss, _, cache = batch_loss(self.batch, params, self.arch)
        return loss, cache.relu_signature()


def _same(sig_a: list[np.ndarray], sig_b: list[np.ndarray]) -> bool:
    return all(np.array_equal(a, b) for a, b in zip(sig_a, sig_b, strict=True))


def _numeric_derivative(objective: _Objective, theta: np.ndarray, i: int, eps: float, f0: float, sig0) -> tuple[float, bool]:
    def at(delta: float):
        shifted = theta.copy()
        shifted[i] += delta
        return objective(shifted)

    central = 0.0
    for shrink in _STEP_SHRINK:
        h = eps * shrink
        f_plus, sig_plus = at(h)
        f_minus, sig_minus = at(-h)
        central = (f_plus - f_minus) / (2.0 * h)
        plus_ok, minus_ok = _same(sig_plus, sig0), _same(sig_minus, sig0)
        if plus_ok and minus_ok:
            return central, shrink != 1.0
        if plus_ok or minus_ok:
            side = 1.0 if plus_ok else -1.0
            f_one = f_plus if plus_ok else f_minus
            f_two, sig_two = at(2.0 * side * h)
            if _same(sig_two, sig0):
                return side * (-3.0 * f0 + 4.0 * f_one - f_two) / (2.0 * h), True
    return central, True


def run_grad_check(
    arch: ArchConfig,
    channel_cfg: ChannelConfig,
    eps: float = 1e-5,
    rng: np.random.Generator | None = None,
    *,
    order: int = 4,
    batch_size: int = 4,
    snr_db: float = 10.0,
    init_shift: float = 0.0,
    grid_shape: tuple[int, int] | None = None,
    max_coords: int = SUBSET_SIZE,
) -> GradCheckReport:
    """
    Compara `backward` com diferenças finitas centrais sobre um lote aleatório.

    Parameters
    ----------
    arch : ArchConfig
        Arquitetura (até 5e4 parâmetros).
    channel_cfg : ChannelConfig
        Canal usado para gerar o lote.
    eps : float, optional
        Passo das diferenças finitas.
    rng : np.random.Generator, optional
        Fonte dos parâmetros, do lote e do subconjunto de coordenadas; o padrão deriva da
        semente de `channel_cfg`.
    order : int, optional
        Modulação das amostras.
    batch_size : int, optional
        Amostras no lote (com `grid_shape`, é substituído pelo tamanho da grade).
    snr_db : float, optional
        SNR das amostras.
    init_shift : float, optional
        Valor somado a todos os vieses da primeira camada de cada MLP, empurrando as ReLUs
        para a região ativa.
    grid_shape : tuple[int, int], optional
        Grade do lote, necessária para exercitar a suavização de escores.
    max_coords : int, optional
        Tamanho do subconjunto aleatório de coordenadas quando há mais de 1e4 parâmetros.

    Returns
    -------
    GradCheckReport
        Maior erro relativo e estatísticas da verificação.

    Raises
    ------
    ConfigError
        Se o modelo tiver mais de 5e4 parâmetros ou ``eps <= 0``.
    """
    if eps <= 0.0:
        raise ConfigError(f"Finite-difference step must be > 0, got {eps}.")
    rng = rng if rng is not None else make_rng(channel_cfg.seed, 0xC4EC, name=channel_cfg.rng)
    params = init_params(arch, channel_cfg.n_rx, rng)
    if params.size > MAX_PARAMS:
        raise ConfigError(f"Gradient check is limited to {MAX_PARAMS} parameters, model has {params.size}.")
    if init_shift:
        for name in params:
            if name.endswith(".b1"):
                params.tensors[name] += init_shift
    if grid_shape is not None:
        batch_size = grid_shape[0] * grid_shape[1]
    batch = generate_batch(channel_cfg, batch_size, (snr_db, snr_db), (order,), arch.max_bits, rng, grid_shape)

    theta = params.flatten()
    _, analytic = backward(batch, params, arch)
    if theta.size > SUBSET_THRESHOLD:
        coords = np.sort(rng.choice(theta.size, size=min(max_coords, theta.size), replace=False))
    else:
        coords = np.arange(theta.size)

    objective = _Objective(batch, arch, channel_cfg.n_rx)
    f0, sig0 = objective(theta)
    names = [name for name in params for _ in range(params[name].size)]
    worst, worst_i, kinks = 0.0, int(coords[0]), 0
    for i in coords:
        numeric, kinked = _numeric_derivative(objective, theta, int(i), eps, f0, sig0)
        kinks += kinked
        err = float(relative_error(analytic[i], numeric))
        if err > worst:
            worst, worst_i = err, int(i)

    report = GradCheckReport(
        max_rel_error=worst,
        worst_param=names[worst_i],
        n_checked=int(coords.size),
        n_params=int(theta.size),
        n_kinks=int(kinks),
    )
    logger.info(
        "Gradient check: max_rel_error=%.3e on %s (%d/%d coordinates, %d kinks).",
        report.max_rel_error,
        report.worst_param,
        report.n_checked,
        report.n_params,
        report.n_kinks,
    )
    return report


def grad_check(arch: ArchConfig, channel_cfg: ChannelConfig, eps: float = 1e-5, rng=None, **kwargs) -> float:
    """Atalho para `run_grad_check` que devolve apenas o maior erro relativo."""
    return run_grad_check(arch, channel_cfg, eps, rng, **kwargs).max_rel_error


GRADCHECK_PRESETS = {
    "small": ({"d": 8, "n_heads": 2, "n_layers": 2}, {"n_rx": 2, "n_tx": 2}),
    "default": ({"d": 32, "n_heads": 4, "n_layers": 2}, {"n_rx": 4, "n_tx": 2}),
}
SMOOTHING_GRID = (3, 3)


def gradcheck_preset(name: str, smoothing: bool = False, seed: int = 0) -> tuple[ArchConfig, ChannelConfig]:
    """
    Arquitetura e canal das verificações padronizadas da CLI.

    ``small`` tem poucos milhares de parâmetros e é verificado por completo; ``default`` usa o
    subconjunto aleatório de coordenadas.

    Examples
    --------
    >>> arch, channel = gradcheck_preset("small")
    >>> arch.d, arch.n_layers, channel.n_rx
    (8, 2, 2)
    """
    if name not in GRADCHECK_PRESETS:
        raise ConfigError(f"Unknown gradcheck preset '{name}'; use one of {sorted(GRADCHECK_PRESETS)}.")
    arch_kwargs, channel_kwargs = GRADCHECK_PRESETS[name]
    arch = ArchConfig(**arch_kwargs, residual=True, score_smoothing=smoothing)
    return arch, ChannelConfig(**channel_kwargs, seed=seed)
