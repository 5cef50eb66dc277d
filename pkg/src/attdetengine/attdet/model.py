"""
Passo direto do AttDet.

Cada camada MIMO é um token. As embeddings ``q``/``k`` vêm da coluna do canal estimado e a
embedding de valor vem da saída do filtro casado elemento a elemento; ``T`` camadas de atenção
atualizam apenas os valores, e ``MLP_LLR`` projeta cada token em logits de bits.

Todas as funções operam em lote sobre REs: ``h_est (B, N_r, N_t)`` e ``y (B, N_r)``. As funções
``*_cached`` guardam os intermediários consumidos por `attdetengine.training.backprop`.
"""

from dataclasses import dataclass, field

import numpy as np

from attdetengine.attdet.params import ArchConfig, LayerParams, MlpParams, ModelParams
from attdetengine.exceptions import DegenerateColumn, DimensionMismatch, UnsupportedOrder

COLUMN_NORM_EPS = 1e-12


@dataclass(eq=False)
class TokenState:
    """
    Estado dos tokens entre camadas.

    Attributes
    ----------
    q, k : np.ndarray
        ``(B, N_t, d)``, fixos ao longo das camadas.
    v : np.ndarray
        ``(B, N_t, d)``, atualizado por cada camada.
    scores : np.ndarray or None
        ``α`` da última camada aplicada, ``(B, N_t, N_t, N_head, d_h)``.
    """

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    scores: np.ndarray | None = None

    @property
    def n_tokens(self) -> int:
        return self.v.shape[-2]


@dataclass(eq=False)
class LayerCache:
    v_in: np.ndarray
    q_proj: np.ndarray
    k_proj: np.ndarray
    v_proj: np.ndarray
    prod: np.ndarray
    smooth_pad: np.ndarray | None
    smooth_dw_out: np.ndarray | None
    prod_s: np.ndarray
    i_pre: np.ndarray
    s_pre: np.ndarray
    alpha: np.ndarray
    v_update: np.ndarray
    h_pre: np.ndarray


@dataclass(eq=False)
class ForwardCache:
    h_phi: np.ndarray
    u_phi: np.ndarray
    q_pre: np.ndarray
    k_pre: np.ndarray
    v_pre: np.ndarray
    state: TokenState
    grid_shape: tuple[int, int] | None
    layers: list[LayerCache] = field(default_factory=list)
    v_final: np.ndarray | None = None
    llr_pre: np.ndarray | None = None

    def relu_signature(self) -> list[np.ndarray]:
        """Padrões de ativação de todas as ReLUs, na ordem do grafo."""
        pres = [self.q_pre, self.k_pre, self.v_pre]
        for layer in self.layers:
            pres += [layer.i_pre, layer.s_pre, layer.h_pre]
        pres.append(self.llr_pre)
        return [p > 0.0 for p in pres]


def phi(col) -> np.ndarray:
    """
    Achata um vetor complexo em ``[Re, Im]`` ao longo do último eixo.

    Examples
    --------
    >>> phi(np.array([1 + 2j, 3 - 1j])).tolist()
    [1.0, 3.0, 2.0, -1.0]
    """
    col = np.asarray(col, dtype=np.complex128)
    return np.concatenate([col.real, col.imag], axis=-1)


def mlp_forward(x: np.ndarray, mlp: MlpParams) -> tuple[np.ndarray, np.ndarray]:
    """
    MLP de duas camadas com ReLU; devolve ``(saída, pré-ativação oculta)``.

    Para MLPs por cabeça, `x` termina em ``(..., N_head, d_h)`` e cada cabeça usa seus pesos.
    """
    if mlp.per_head:
        pre = np.einsum("...hi,hio->...ho", x, mlp.w1) + mlp.b1
        out = np.einsum("...ho,hoi->...hi", np.maximum(pre, 0.0), mlp.w2) + mlp.b2
    else:
        pre = x @ mlp.w1 + mlp.b1
        out = np.maximum(pre, 0.0) @ mlp.w2 + mlp.b2
    return out, pre


def _as_batch(h_est, y) -> tuple[np.ndarray, np.ndarray, bool]:
    h = np.asarray(h_est, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    single = h.ndim == 2
    if single:
        h, y = h[None], y.reshape(1, -1)
    if h.ndim != 3 or y.ndim != 2 or h.shape[:2] != y.shape:
        raise DimensionMismatch(f"Incompatible channel {h.shape} and received vector {y.shape}.")
    return h, y, single


def matched_filter_tokens(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Filtro casado elemento a elemento ``u_i = conj(Ĥ[:, i]) ⊙ y / ‖Ĥ[:, i]‖²``.

    Returns
    -------
    np.ndarray
        ``(B, N_t, N_r)`` complexo.

    Raises
    ------
    DegenerateColumn
        Se alguma coluna tiver norma ao quadrado ``<= 1e-12``.

    Examples
    --------
    >>> matched_filter_tokens(np.array([[[2.0]]]), np.array([[4.0 + 2j]])).tolist()
    [[[(2+1j)]]]
    """
    norms = np.sum(np.abs(h) ** 2, axis=-2)
    if np.any(norms <= COLUMN_NORM_EPS):
        raise DegenerateColumn("Channel column with (near) zero norm; cannot build value token.")
    cols = np.swapaxes(h, -1, -2)
    return cols.conj() * y[..., None, :] / norms[..., None]


def _embed(h: np.ndarray, y: np.ndarray, params: ModelParams) -> ForwardCache:
    h_phi = phi(np.swapaxes(h, -1, -2))
    u_phi = phi(matched_filter_tokens(h, y))
    q, q_pre = mlp_forward(h_phi, params.mlp("mlp_q"))
    k, k_pre = mlp_forward(h_phi, params.mlp(params.key_prefix))
    v, v_pre = mlp_forward(u_phi, params.mlp("mlp_v"))
    return ForwardCache(h_phi, u_phi, q_pre, k_pre, v_pre, TokenState(q, k, v), grid_shape=None)


def embed_tokens(h_est, y, params: ModelParams, arch: ArchConfig) -> TokenState:
    """
    Embeddings de consulta, chave e valor para cada camada MIMO.

    Parameters
    ----------
    h_est : np.ndarray
        Canal estimado, ``(N_r, N_t)`` ou ``(B, N_r, N_t)``.
    y : np.ndarray
        Sinal recebido, ``(N_r,)`` ou ``(B, N_r)``.
    params : ModelParams
        Parâmetros do modelo.
    arch : ArchConfig
        Arquitetura.

    Returns
    -------
    TokenState
        ``N_t`` tokens com ``q``, ``k`` e ``v`` em ``R^d`` (sempre com eixo de lote).

    Raises
    ------
    DegenerateColumn
        Se alguma coluna de ``Ĥ`` tiver norma ao quadrado ``<= 1e-12``.
    """
    h, y, _ = _as_batch(h_est, y)
    _check_compatible(h, params, arch)
    return _embed(h, y, params).state


def _grid(x: np.ndarray, grid_shape: tuple[int, int]) -> np.ndarray:
    g1, g2 = grid_shape
    if x.shape[0] % (g1 * g2):
        raise DimensionMismatch(f"Batch of {x.shape[0]} REs is not a whole number of {g1}x{g2} grids.")
    return x.reshape(-1, g1, g2, *x.shape[1:])


def _smooth_forward(grid: np.ndarray, depthwise: np.ndarray, pointwise: np.ndarray):
    g1, g2 = grid.shape[1], grid.shape[2]
    pad = np.pad(grid, [(0, 0), (1, 1), (1, 1)] + [(0, 0)] * (grid.ndim - 3))
    dw_out = np.zeros_like(grid)
    for a in range(depthwise.shape[-2]):
        for b in range(depthwise.shape[-1]):
            dw_out += pad[:, a : a + g1, b : b + g2] * depthwise[..., a, b]
    return np.einsum("...hc,hce->...he", dw_out, pointwise), pad, dw_out


def smooth_scores(score_grid: np.ndarray, depthwise: np.ndarray, pointwise: np.ndarray) -> np.ndarray:
    """
    Convolução separável 3x3 sobre a grade de REs.

    Para cada canal ``(i, j, cabeça, componente)`` aplica uma correlação cruzada 3x3 com
    preenchimento de zeros e, em seguida, a mistura pontual entre as ``d_h`` componentes de
    cada cabeça. O shape de saída é o de entrada.

    Parameters
    ----------
    score_grid : np.ndarray
        ``(n_grades, G1, G2, ..., N_head, d_h)``.
    depthwise : np.ndarray
        ``(N_head, d_h, 3, 3)``.
    pointwise : np.ndarray
        ``(N_head, d_h, d_h)``; a saída é ``Σ_c x[..., h, c] · pointwise[h, c, e]``.

    Examples
    --------
    >>> grid = np.ones((1, 3, 3, 1, 1))
    >>> dw = np.zeros((1, 1, 3, 3)); dw[..., 1, 1] = 1.0
    >>> out = smooth_scores(grid, dw, np.ones((1, 1, 1)))
    >>> bool(np.array_equal(out, grid))
    True
    """
    return _smooth_forward(np.asarray(score_grid, dtype=np.float64), depthwise, pointwise)[0]


def _attention_cached(
    state: TokenState, layer: LayerParams, arch: ArchConfig, grid_shape: tuple[int, int] | None
) -> tuple[TokenState, LayerCache]:
    batch, n_tok, d = state.v.shape
    heads, dh = arch.n_heads, arch.d_head
    split = (batch, n_tok, heads, dh)
    q_proj = np.einsum("bnhi,hij->bnhj", state.q.reshape(split), layer.proj_q)
    k_proj = np.einsum("bnhi,hij->bnhj", state.k.reshape(split), layer.proj_k)
    v_proj = np.einsum("bnhi,hij->bnhj", state.v.reshape(split), layer.proj_v)
    prod = q_proj[:, :, None] * k_proj[:, None, :]

    pad = dw_out = None
    if arch.score_smoothing:
        smoothed, pad, dw_out = _smooth_forward(_grid(prod, grid_shape or (1, 1)), layer.smooth_dw, layer.smooth_pw)
        prod_s = smoothed.reshape(prod.shape)
    else:
        prod_s = prod

    idx = np.arange(n_tok)
    alpha_i, i_pre = mlp_forward(prod_s, layer.mlp_i)
    alpha_s, s_pre = mlp_forward(prod_s[:, idx, idx], layer.mlp_s)
    off_diag = ~np.eye(n_tok, dtype=bool)[None, :, :, None, None]
    alpha = np.where(off_diag, alpha_i, 0.0)
    alpha[:, idx, idx] = alpha_s

    v_update = np.einsum("bijhc,bjhc->bihc", alpha, v_proj).reshape(batch, n_tok, d)
    mixed, h_pre = mlp_forward(v_update, layer.mlp_h)
    v_out = state.v + mixed if arch.residual else mixed

    cache = LayerCache(
        v_in=state.v,
        q_proj=q_proj,
        k_proj=k_proj,
        v_proj=v_proj,
        prod=prod,
        smooth_pad=pad,
        smooth_dw_out=dw_out,
        prod_s=prod_s,
        i_pre=i_pre,
        s_pre=s_pre,
        alpha=alpha,
        v_update=v_update,
        h_pre=h_pre,
    )
    return TokenState(state.q, state.k, v_out, alpha), cache


def attention_layer(
    state: TokenState, layer_params: LayerParams, arch: ArchConfig, grid_shape: tuple[int, int] | None = None
) -> TokenState:
    """
    Uma camada de atenção do AttDet.

    Por cabeça, com fatias de ``d_h`` componentes: projeções ``q̃ = q·P_q``, ``k̃ = k·P_k`` e
    ``ṽ = v·P_v``; escores ``α_ij = MLP_I(q̃_i ⊙ k̃_j)`` para ``i ≠ j`` e
    ``α_ii = MLP_S(q̃_i ⊙ k̃_i)``; atualização ``v'_i = Σ_j α_ij ⊙ ṽ_j`` (incluindo ``j = i``).
    As cabeças são concatenadas e ``MLP_H`` mistura o resultado; com residual ativo a saída é
    ``v + MLP_H(v')``. ``q`` e ``k`` passam inalterados.

    Parameters
    ----------
    state : TokenState
        Tokens de entrada.
    layer_params : LayerParams
        Parâmetros da camada (``ModelParams.layer(t)``).
    arch : ArchConfig
        Arquitetura.
    grid_shape : tuple[int, int], optional
        Grade ``(G1, G2)`` dos REs do lote, usada apenas com suavização de escores.

    Returns
    -------
    TokenState
        Tokens atualizados, com ``scores`` preenchido.
    """
    return _attention_cached(state, layer_params, arch, grid_shape)[0]


def _check_compatible(h: np.ndarray, params: ModelParams, arch: ArchConfig) -> None:
    if params.arch != arch:
        raise DimensionMismatch("Parameters were built for a different architecture.")
    if h.shape[1] != params.n_rx:
        raise DimensionMismatch(f"Model expects N_r={params.n_rx}, channel has {h.shape[1]} rows.")


def forward_cached(
    h_est, y, params: ModelParams, arch: ArchConfig, grid_shape: tuple[int, int] | None = None
) -> tuple[np.ndarray, ForwardCache]:
    """
    Passo direto completo guardando os intermediários.

    Returns
    -------
    tuple[np.ndarray, ForwardCache]
        Logits de todas as ``max_bits`` saídas, ``(B, N_t, max_bits)``, e o cache.
    """
    h, y, _ = _as_batch(h_est, y)
    _check_compatible(h, params, arch)
    cache = _embed(h, y, params)
    cache.grid_shape = grid_shape
    state = cache.state
    for t in range(arch.n_layers):
        state, layer_cache = _attention_cached(state, params.layer(t), arch, grid_shape)
        cache.layers.append(layer_cache)
    cache.v_final = state.v
    logits, cache.llr_pre = mlp_forward(state.v, params.mlp("mlp_llr"))
    return logits, cache


def forward(
    h_est,
    y,
    params: ModelParams,
    arch: ArchConfig,
    bits_per_symbol: int,
    grid_shape: tuple[int, int] | None = None,
) -> np.ndarray:
    """
    Logits por camada do AttDet, na convenção ``log(P(1)/P(0))``.

    Apenas as primeiras `bits_per_symbol` saídas de ``MLP_LLR`` são mantidas; as demais são
    mascaradas. O número de tokens é livre: o mesmo modelo atende qualquer ``N_t``.

    Parameters
    ----------
    h_est : np.ndarray
        ``(N_r, N_t)`` ou ``(B, N_r, N_t)``.
    y : np.ndarray
        ``(N_r,)`` ou ``(B, N_r)``.
    params : ModelParams
        Parâmetros.
    arch : ArchConfig
        Arquitetura.
    bits_per_symbol : int
        Bits por símbolo da modulação avaliada (``<= arch.max_bits``).
    grid_shape : tuple[int, int], optional
        Grade de REs para a suavização de escores.

    Returns
    -------
    np.ndarray
        ``(N_t, bits_per_symbol)`` ou ``(B, N_t, bits_per_symbol)``.

    Raises
    ------
    UnsupportedOrder
        Se `bits_per_symbol` exceder ``arch.max_bits``.
    DegenerateColumn
        Propagado das embeddings.

    Examples
    --------
    >>> from attdetengine.attdet.params import init_params
    >>> arch = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=4)
    >>> p = init_params(arch, 2, np.random.default_rng(1))
    >>> forward(np.ones((2, 3)), np.ones(2), p, arch, 2).shape
    (3, 2)
    """
    if not 1 <= bits_per_symbol <= arch.max_bits:
        raise UnsupportedOrder(f"Model supports up to {arch.max_bits} bits/symbol, asked for {bits_per_symbol}.")
    single = np.ndim(h_est) == 2
    logits, _ = forward_cached(h_est, y, params, arch, grid_shape)
    logits = logits[..., :bits_per_symbol]
    return logits[0] if single else logits
