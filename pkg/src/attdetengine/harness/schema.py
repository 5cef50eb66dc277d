"""
Esquema versionado dos arquivos de experimento (TOML).

Seções: ``[channel]``, ``[arch]``, ``[train]``, ``[sweep]``, ``[kbest]`` e ``[logging]``, além de
``schema_version`` no topo. Cada seção corresponde a uma dataclass congelada cujos valores
padrão são os padrões do arquivo; seções ou chaves desconhecidas são rejeitadas.
"""

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import toml

from attdetengine.attdet.params import ArchConfig
from attdetengine.channel.channel import ChannelConfig
from attdetengine.config.logger import LogFactory
from attdetengine.detectors.kbest import KBestConfig
from attdetengine.exceptions import ConfigError
from attdetengine.modem.constellation import LLR_CLIP_DEFAULT, SUPPORTED_ORDERS
from attdetengine.training.trainer import TrainConfig

logger = LogFactory.get_logger("Schema")

SCHEMA_VERSION = 1
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class SweepConfig:
    """
    Parâmetros da varredura de BER.

    Attributes
    ----------
    order : int
        Modulação avaliada.
    snr_grid_db : tuple[float, ...]
        Grade de SNR, não vazia e estritamente crescente.
    detectors : tuple[str, ...]
        Rótulos de detector (ver `DetectorRegistry`).
    min_bit_errors : int
        Erros de bit que encerram um ponto.
    max_re_per_point : int
        Orçamento de REs por ponto.
    chunk_size : int
        REs por bloco de simulação (unidade de paralelismo e de fluxo aleatório).
    workers : int
        Processos usados por ponto.
    output : str
        CSV de resultados.
    llr_clip : float
        Saturação das LLRs dos detectores clássicos.
    """

    order: int = 16
    snr_grid_db: tuple[float, ...] = (0.0, 4.0, 8.0, 12.0, 16.0)
    detectors: tuple[str, ...] = ("zf", "mmse")
    min_bit_errors: int = 200
    max_re_per_point: int = 1_000_000
    chunk_size: int = 10_000
    workers: int = 1
    output: str = "results/ber.csv"
    llr_clip: float = LLR_CLIP_DEFAULT

    def __post_init__(self) -> None:
        if self.order not in SUPPORTED_ORDERS:
            raise ConfigError(f"order must be one of {SUPPORTED_ORDERS}, got {self.order}.")
        grid = self.snr_grid_db
        if not grid or any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
            raise ConfigError(f"snr_grid_db must be non-empty and strictly ascending, got {list(grid)}.")
        if self.min_bit_errors < 1:
            raise ConfigError(f"min_bit_errors must be >= 1, got {self.min_bit_errors}.")
        if self.max_re_per_point < 1 or self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("max_re_per_point, chunk_size and workers must be >= 1.")
        if self.llr_clip <= 0.0:
            raise ConfigError(f"llr_clip must be > 0, got {self.llr_clip}.")


@dataclass(frozen=True)
class KBestSection:
    k: int = 64


@dataclass(frozen=True)
class LoggingSection:
    level: str = "INFO"

    def __post_init__(self) -> None:
        if self.level.upper() not in LOG_LEVELS:
            raise ConfigError(f"logging.level must be one of {LOG_LEVELS}, got {self.level}.")


@dataclass(frozen=True)
class SimConfig:
    """
    Registro único de um experimento: canal, modem, detectores, treino e varredura.

    Examples
    --------
    >>> cfg = SimConfig()
    >>> cfg.order, cfg.min_bit_errors, cfg.seed
    (16, 200, 0)
    """

    channel: ChannelConfig = field(default_factory=ChannelConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    kbest: KBestConfig = field(default_factory=KBestConfig)
    logging: LoggingSection = field(default_factory=LoggingSection)
    source: str | None = None

    @property
    def order(self) -> int:
        return self.sweep.order

    @property
    def snr_grid_db(self) -> tuple[float, ...]:
        return self.sweep.snr_grid_db

    @property
    def detectors(self) -> tuple[str, ...]:
        return self.sweep.detectors

    @property
    def min_bit_errors(self) -> int:
        return self.sweep.min_bit_errors

    @property
    def max_re_per_point(self) -> int:
        return self.sweep.max_re_per_point

    @property
    def seed(self) -> int:
        return self.channel.seed

    @property
    def output(self) -> str:
        return self.sweep.output


HELP: dict[str, dict[str, str]] = {
    "channel": {
        "n_rx": "antenas de recepção N_r",
        "n_tx": "camadas / antenas de transmissão N_t (N_r >= N_t)",
        "model": "iid | kronecker | awgn",
        "rho_tx": "correlação exponencial na transmissão, [0, 1)",
        "rho_rx": "correlação exponencial na recepção, [0, 1)",
        "csi_error_var": "variância do erro de CSI (0 = CSI ideal)",
        "seed": "semente de todos os fluxos aleatórios",
        "rng": "gerador: philox | pcg64",
    },
    "arch": {
        "d": "dimensão interna do modelo",
        "n_heads": "número de cabeças (divide d)",
        "n_layers": "camadas de atenção T",
        "max_bits": "bits da maior modulação suportada: 2 | 4 | 6",
        "share_qk": "mesma MLP para consultas e chaves",
        "share_layer_params": "mesmos parâmetros em todas as camadas",
        "score_smoothing": "convolução separável 3x3 dos escores sobre a grade de REs",
        "residual": "conexão residual em torno da atualização de valores",
    },
    "train": {
        "samples_total": "amostras geradas no treino",
        "batch_size": "amostras por passo",
        "lr": "taxa de aprendizado do Adam",
        "snr_range_db": "faixa [lo, hi] de SNR de treino",
        "orders": "modulações sorteadas por amostra",
        "eval_every": "passos entre avaliações (0 = só a final)",
        "eval_snr_db": "SNR da avaliação de BER",
        "eval_samples": "amostras do conjunto de avaliação",
        "checkpoint_every": "passos entre checkpoints (0 = só o final)",
        "checkpoint_path": "arquivo de checkpoint",
        "log_path": "CSV de log do treino",
        "grid_shape": "grade [G1, G2] de REs por amostra (suavização de escores)",
        "divergence_factor": "múltiplo da perda inicial considerado divergência",
        "divergence_patience": "passos consecutivos acima do limite antes de abortar",
    },
    "sweep": {
        "order": "modulação avaliada: 4 | 16 | 64",
        "snr_grid_db": "grade de SNR crescente",
        "detectors": "zf | mmse | mmse_ideal | mf | ml | kbest(K) | attdet(caminho)",
        "min_bit_errors": "erros de bit que encerram um ponto",
        "max_re_per_point": "orçamento de REs por ponto",
        "chunk_size": "REs por bloco de simulação",
        "workers": "processos por ponto",
        "output": "CSV de resultados",
        "llr_clip": "saturação das LLRs",
    },
    "kbest": {"k": "largura da lista do rótulo kbest sem argumento"},
    "logging": {"level": "DEBUG | INFO | WARNING | ERROR | CRITICAL"},
}

_SECTIONS: dict[str, type] = {
    "channel": ChannelConfig,
    "arch": ArchConfig,
    "train": TrainConfig,
    "sweep": SweepConfig,
    "kbest": KBestSection,
    "logging": LoggingSection,
}
_OPTIONAL_TYPES = {"checkpoint_path": str, "log_path": str, "grid_shape": tuple}
_TUPLE_ITEMS = {"snr_range_db": float, "snr_grid_db": float, "orders": int, "grid_shape": int, "detectors": str}
_SKIPPED = {("train", "channel")}


def _defaults(section: str) -> dict[str, Any]:
    instance = _SECTIONS[section]()
    return {f.name: getattr(instance, f.name) for f in fields(instance) if (section, f.name) not in _SKIPPED}


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    expected = _OPTIONAL_TYPES.get(key, type(default))
    where = f"{section}.{key}"
    if expected is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean, got {value!r}.")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}.")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}.")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}.")
        return value
    if expected is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be an array, got {value!r}.")
        item = _TUPLE_ITEMS[key]
        try:
            return tuple(_coerce(section, key, v, item()) for v in value)
        except ConfigError as e:
            raise ConfigError(f"{where} has an invalid item: {e}") from e
    raise ConfigError(f"{where} has an unsupported type.")


def _section(name: str, data: Any) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table.")
    defaults = _defaults(name)
    unknown = sorted(set(data) - set(defaults))
    if unknown:
        raise ConfigError(f"Unknown key(s) in [{name}]: {', '.join(unknown)}.")
    return {key: _coerce(name, key, value, defaults[key]) for key, value in data.items()}


def build_sim_config(data: dict[str, Any], source: str | None = None) -> SimConfig:
    """
    Valida um dicionário já decodificado e monta o `SimConfig`.

    Raises
    ------
    ConfigError
        Para versões, seções, chaves, tipos ou valores inválidos.

    Examples
    --------
    >>> build_sim_config({"sweep": {"detectors": ["ml"]}}).detectors
    ('ml',)
    """
    data = dict(data)
    version = data.pop("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported schema_version {version}; this build reads version {SCHEMA_VERSION}.")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"Unknown section(s): {', '.join(unknown)}.")
    values = {name: _section(name, data.get(name, {})) for name in _SECTIONS}
    try:
        channel = ChannelConfig(**values["channel"])
        arch = ArchConfig(**values["arch"])
        train = TrainConfig(channel=channel, **values["train"])
        sweep = SweepConfig(**values["sweep"])
        kbest = KBestConfig(k=KBestSection(**values["kbest"]).k, llr_clip=sweep.llr_clip)
        logging_section = LoggingSection(**values["logging"])
    except ConfigError as e:
        raise ConfigError(f"{source or 'config'}: {e}") from e
    return SimConfig(channel, arch, train, sweep, kbest, logging_section, source)


def load_sim_config(path) -> SimConfig:
    """
    Lê e valida um arquivo de experimento.

    Raises
    ------
    ConfigError
        Se o arquivo não existir, não for TOML válido ou violar o esquema.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        data = toml.load(path)
    except (toml.TomlDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}") from e
    cfg = build_sim_config(data, str(path))
    logger.info("Loaded experiment config %s (schema v%d).", path, SCHEMA_VERSION)
    return cfg


def print_schema() -> str:
    """
    Documento TOML com todas as chaves, seus padrões e uma linha de ajuda.

    Chaves sem padrão aparecem comentadas.

    Examples
    --------
    >>> print_schema().splitlines()[0]
    'schema_version = 1'
    """
    lines = [f"schema_version = {SCHEMA_VERSION}"]
    for name in _SECTIONS:
        lines += ["", f"[{name}]"]
        for key, default in _defaults(name).items():
            lines.append(f"# {HELP[name][key]}")
            if default is None:
                lines.append(f"# {key} =")
                continue
            value = list(default) if isinstance(default, tuple) else default
            lines.append(toml.dumps({key: value}).strip())
    return "\n".join(lines) + "\n"
