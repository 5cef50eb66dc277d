"""
Parâmetros aprendíveis do AttDet.

Todos os tensores vivem em um dicionário ordenado ``nome -> np.ndarray`` cuja ordem e shapes
derivam apenas de ``(ArchConfig, n_rx)``; `ModelParams.flatten` concatena os tensores nessa
ordem em um único vetor real, usado pelo otimizador, pelo checkpoint e pela verificação de
gradientes.

Convenção de vetor-linha: uma MLP calcula ``relu(x @ w1 + b1) @ w2 + b2``. As MLPs por cabeça
(``mlp_i``, ``mlp_s``) empilham as cabeças no primeiro eixo: ``w1 (H, d_h, 4d_h)``.
"""

from collections.abc import Iterator
from dataclasses import asdict, dataclass

import numpy as np

from attdetengine.exceptions import ConfigError, DimensionMismatch

SUPPORTED_MAX_BITS = (2, 4, 6)
SMOOTHING_KERNEL = 3


@dataclass(frozen=True)
class ArchConfig:
    """
    Hiperparâmetros de arquitetura do AttDet.

    Attributes
    ----------
    d : int
        Dimensão interna do modelo.
    n_heads : int
        Número de cabeças; ``d`` deve ser divisível por ele.
    n_layers : int
        Número de camadas de atenção ``T``.
    max_bits : int
        ``log2`` da maior ordem suportada (2, 4 ou 6).
    share_qk : bool
        Usa a mesma MLP para consultas e chaves.
    share_layer_params : bool
        Reutiliza os parâmetros da camada 0 em todas as camadas.
    score_smoothing : bool
        Ativa a convolução separável 3x3 sobre a grade de REs.
    residual : bool
        Conexão residual em torno da atualização de valores + ``MLP_H``.

    Examples
    --------
    >>> ArchConfig(d=8, n_heads=2).d_head
    4
    """

    d: int = 64
    n_heads: int = 4
    n_layers: int = 4
    max_bits: int = 6
    share_qk: bool = False
    share_layer_params: bool = False
    score_smoothing: bool = False
    residual: bool = True

    def __post_init__(self) -> None:
        if self.d < 1 or self.n_heads < 1 or self.d % self.n_heads:
            raise ConfigError(f"d={self.d} must be a positive multiple of n_heads={self.n_heads}.")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}.")
        if self.max_bits not in SUPPORTED_MAX_BITS:
            raise ConfigError(f"max_bits must be one of {SUPPORTED_MAX_BITS}, got {self.max_bits}.")

    @property
    def d_head(self) -> int:
        return self.d // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Pesos de uma MLP de duas camadas com ReLU no meio."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @property
    def per_head(self) -> bool:
        return self.w1.ndim == 3


@dataclass(frozen=True, eq=False)
class LayerParams:
    """Visão dos parâmetros de uma camada de atenção (``prefix`` é o nome no dicionário)."""

    prefix: str
    proj_q: np.ndarray
    proj_k: np.ndarray
    proj_v: np.ndarray
    mlp_i: MlpParams
    mlp_s: MlpParams
    mlp_h: MlpParams
    smooth_dw: np.ndarray | None = None
    smooth_pw: np.ndarray | None = None


def _mlp_shapes(prefix: str, n_in: int, n_hidden: int, n_out: int, heads: int | None = None):
    lead = () if heads is None else (heads,)
    yield f"{prefix}.w1", lead + (n_in, n_hidden)
    yield f"{prefix}.b1", lead + (n_hidden,)
    yield f"{prefix}.w2", lead + (n_hidden, n_out)
    yield f"{prefix}.b2", lead + (n_out,)


def layer_prefix(arch: ArchConfig, t: int) -> str:
    """Nome do bloco de parâmetros usado pela camada `t`."""
    return "layer0" if arch.share_layer_params else f"layer{t}"


def param_layout(arch: ArchConfig, n_rx: int) -> list[tuple[str, tuple[int, ...]]]:
    """
    Lista ordenada ``(nome, shape)`` de todos os tensores do modelo.

    Examples
    --------
    >>> layout = param_layout(ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=2), n_rx=2)
    >>> layout[0]
    ('mlp_q.w1', (4, 8))
    >>> layout[-1]
    ('mlp_llr.b2', (2,))
    """
    if n_rx < 1:
        raise ConfigError(f"n_rx must be >= 1, got {n_rx}.")
    d, dh, heads = arch.d, arch.d_head, arch.n_heads
    layout: list[tuple[str, tuple[int, ...]]] = []
    layout += _mlp_shapes("mlp_q", 2 * n_rx, d, d)
    if not arch.share_qk:
        layout += _mlp_shapes("mlp_k", 2 * n_rx, d, d)
    layout += _mlp_shapes("mlp_v", 2 * n_rx, d, d)

    n_blocks = 1 if arch.share_layer_params else arch.n_layers
    for t in range(n_blocks):
        p = f"layer{t}"
        layout += [(f"{p}.proj_q", (heads, dh, dh)), (f"{p}.proj_k", (heads, dh, dh)), (f"{p}.proj_v", (heads, dh, dh))]
        layout += _mlp_shapes(f"{p}.mlp_i", dh, 4 * dh, dh, heads)
        layout += _mlp_shapes(f"{p}.mlp_s", dh, 4 * dh, dh, heads)
        layout += _mlp_shapes(f"{p}.mlp_h", d, 4 * d, d)
        if arch.score_smoothing:
            layout += [
                (f"{p}.smooth_dw", (heads, dh, SMOOTHING_KERNEL, SMOOTHING_KERNEL)),
                (f"{p}.smooth_pw", (heads, dh, dh)),
            ]
    layout += _mlp_shapes("mlp_llr", d, 2 * d, arch.max_bits)
    return layout


def param_count(arch: ArchConfig, n_rx: int) -> int:
    """
    Número total de parâmetros reais.

    Examples
    --------
    >>> param_count(ArchConfig(), n_rx=8)
    237574
    """
    return sum(int(np.prod(shape)) for _, shape in param_layout(arch, n_rx))


class ModelParams:
    """
    Conjunto completo de tensores do AttDet para ``(arch, n_rx)``.

    Parameters
    ----------
    arch : ArchConfig
        Arquitetura.
    n_rx : int
        Antenas de recepção (fixa a largura das embeddings de entrada).
    tensors : dict[str, np.ndarray]
        Tensores na ordem de `param_layout`.

    Raises
    ------
    DimensionMismatch
        Se os nomes ou shapes não corresponderem ao layout.

    Examples
    --------
    >>> arch = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=2)
    >>> p = init_params(arch, 2, np.random.default_rng(0))
    >>> q = ModelParams.unflatten(p.flatten(), arch, 2)
    >>> bool(np.array_equal(p.flatten(), q.flatten()))
    True
    """

    def __init__(self, arch: ArchConfig, n_rx: int, tensors: dict[str, np.ndarray]) -> None:
        layout = param_layout(arch, n_rx)
        if [name for name, _ in layout] != list(tensors):
            raise DimensionMismatch("Parameter names do not follow the model layout.")
        for name, shape in layout:
            if tensors[name].shape != shape:
                raise DimensionMismatch(f"{name}: expected shape {shape}, got {tensors[name].shape}.")
        self.arch = arch
        self.n_rx = n_rx
        self.tensors = tensors

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    @property
    def size(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def mlp(self, prefix: str) -> MlpParams:
        t = self.tensors
        return MlpParams(t[f"{prefix}.w1"], t[f"{prefix}.b1"], t[f"{prefix}.w2"], t[f"{prefix}.b2"])

    def layer(self, t: int) -> LayerParams:
        p = layer_prefix(self.arch, t)
        smoothing = self.arch.score_smoothing
        return LayerParams(
            prefix=p,
            proj_q=self.tensors[f"{p}.proj_q"],
            proj_k=self.tensors[f"{p}.proj_k"],
            proj_v=self.tensors[f"{p}.proj_v"],
            mlp_i=self.mlp(f"{p}.mlp_i"),
            mlp_s=self.mlp(f"{p}.mlp_s"),
            mlp_h=self.mlp(f"{p}.mlp_h"),
            smooth_dw=self.tensors[f"{p}.smooth_dw"] if smoothing else None,
            smooth_pw=self.tensors[f"{p}.smooth_pw"] if smoothing else None,
        )

    @property
    def key_prefix(self) -> str:
        return "mlp_q" if self.arch.share_qk else "mlp_k"

    def flatten(self) -> np.ndarray:
        """Vetor ``float64`` com todos os tensores concatenados na ordem do layout."""
        return np.concatenate([t.ravel() for t in self.tensors.values()]).astype(np.float64)

    @classmethod
    def unflatten(cls, vector: np.ndarray, arch: ArchConfig, n_rx: int) -> "ModelParams":
        vector = np.asarray(vector, dtype=np.float64)
        layout = param_layout(arch, n_rx)
        expected = sum(int(np.prod(shape)) for _, shape in layout)
        if vector.ndim != 1 or vector.size != expected:
            raise DimensionMismatch(f"Parameter vector has {vector.size} entries, expected {expected}.")
        tensors: dict[str, np.ndarray] = {}
        offset = 0
        for name, shape in layout:
            n = int(np.prod(shape))
            tensors[name] = vector[offset : offset + n].reshape(shape).copy()
            offset += n
        return cls(arch, n_rx, tensors)

    @classmethod
    def zeros(cls, arch: ArchConfig, n_rx: int) -> "ModelParams":
        return cls(arch, n_rx, {name: np.zeros(shape) for name, shape in param_layout(arch, n_rx)})

    def copy(self) -> "ModelParams":
        return ModelParams(self.arch, self.n_rx, {k: v.copy() for k, v in self.tensors.items()})


def _xavier_bound(shape: tuple[int, ...]) -> float:
    fan_in, fan_out = shape[-2], shape[-1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(arch: ArchConfig, n_rx: int, rng: np.random.Generator) -> ModelParams:
    """
    Inicializa os parâmetros: Xavier uniforme nos pesos, vieses nulos.

    Os núcleos de suavização começam como o filtro identidade (tap central 1 e mistura
    pontual identidade), de modo que ativar a suavização não altera a saída inicial.

    Parameters
    ----------
    arch : ArchConfig
        Arquitetura.
    n_rx : int
        Antenas de recepção.
    rng : np.random.Generator
        Fonte de aleatoriedade; a mesma semente gera vetores idênticos.

    Returns
    -------
    ModelParams
        Parâmetros iniciais.
    """
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_layout(arch, n_rx):
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("b"):
            tensors[name] = np.zeros(shape)
        elif leaf == "smooth_dw":
            kernel = np.zeros(shape)
            kernel[..., SMOOTHING_KERNEL // 2, SMOOTHING_KERNEL // 2] = 1.0
            tensors[name] = kernel
        elif leaf == "smooth_pw":
            tensors[name] = np.broadcast_to(np.eye(shape[-1]), shape).copy()
        else:
            bound = _xavier_bound(shape)
            tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(arch, n_rx, tensors)
