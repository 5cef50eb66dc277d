"""
Gradientes em modo reverso, derivados à mão, para o grafo completo do AttDet.

A ordem reversa espelha `attdetengine.attdet.model.forward_cached`: cabeça LLR, camadas de
atenção da última para a primeira e, por fim, as três MLPs de embedding. ``q`` e ``k`` são os
mesmos em todas as camadas, então seus gradientes acumulam ao longo delas antes de entrarem em
``MLP_Q``/``MLP_K``. Com ``share_layer_params`` todas as camadas acumulam no bloco ``layer0``.
"""

import numpy as np

from attdetengine.attdet.model import ForwardCache, forward_cached
from attdetengine.attdet.params import ArchConfig, MlpParams, ModelParams
from attdetengine.training.batch import TrainingBatch
from attdetengine.training.loss import bce_loss, bit_mask


def mlp_backward(dout: np.ndarray, x: np.ndarray, pre: np.ndarray, mlp: MlpParams):
    """
    Retropropagação de ``relu(x @ w1 + b1) @ w2 + b2``.

    Returns
    -------
    tuple
        ``(dx, dw1, db1, dw2, db2)``; os gradientes dos pesos somam sobre todos os eixos
        iniciais (lote, tokens, pares).
    """
    act = np.maximum(pre, 0.0)
    if mlp.per_head:
        heads = mlp.w1.shape[0]
        xf = x.reshape(-1, heads, x.shape[-1])
        af = act.reshape(-1, heads, act.shape[-1])
        df = dout.reshape(-1, heads, dout.shape[-1])
        dw2 = np.einsum("nho,nhi->hoi", af, df)
        db2 = df.sum(axis=0)
        dpre = np.einsum("nhi,hoi->nho", df, mlp.w2) * (af > 0.0)
        dw1 = np.einsum("nhi,nho->hio", xf, dpre)
        db1 = dpre.sum(axis=0)
        dx = np.einsum("nho,hio->nhi", dpre, mlp.w1)
    else:
        xf = x.reshape(-1, x.shape[-1])
        af = act.reshape(-1, act.shape[-1])
        df = dout.reshape(-1, dout.shape[-1])
        dw2 = af.T @ df
        db2 = df.sum(axis=0)
        dpre = (df @ mlp.w2.T) * (af > 0.0)
        dw1 = xf.T @ dpre
        db1 = dpre.sum(axis=0)
        dx = dpre @ mlp.w1.T
    return dx.reshape(x.shape), dw1, db1, dw2, db2


def smooth_backward(dout: np.ndarray, pad: np.ndarray, dw_out: np.ndarray, depthwise: np.ndarray, pointwise: np.ndarray):
    """
    Retropropagação da convolução separável (correlação 3x3 por canal + mistura pontual).

    Returns
    -------
    tuple
        ``(dgrid, ddepthwise, dpointwise)``.
    """
    heads, dh = pointwise.shape[0], pointwise.shape[1]
    g1, g2 = dout.shape[1], dout.shape[2]
    dpointwise = np.einsum("nhc,nhe->hce", dw_out.reshape(-1, heads, dh), dout.reshape(-1, heads, dh))
    d_dw_out = np.einsum("...he,hce->...hc", dout, pointwise)
    ddepthwise = np.zeros_like(depthwise)
    dpad = np.zeros_like(pad)
    for a in range(depthwise.shape[-2]):
        for b in range(depthwise.shape[-1]):
            window = pad[:, a : a + g1, b : b + g2]
            ddepthwise[..., a, b] = (d_dw_out * window).reshape(-1, heads, dh).sum(axis=0)
            dpad[:, a : a + g1, b : b + g2] += d_dw_out * depthwise[..., a, b]
    return dpad[:, 1:-1, 1:-1], ddepthwise, dpointwise


def _accumulate_mlp(grads: ModelParams, prefix: str, parts) -> None:
    _, dw1, db1, dw2, db2 = parts
    grads.tensors[f"{prefix}.w1"] += dw1
    grads.tensors[f"{prefix}.b1"] += db1
    grads.tensors[f"{prefix}.w2"] += dw2
    grads.tensors[f"{prefix}.b2"] += db2


def backprop_logits(dlogits: np.ndarray, cache: ForwardCache, params: ModelParams, arch: ArchConfig) -> ModelParams:
    """
    Propaga ``∂perda/∂logits`` (``(B, N_t, max_bits)``) até todos os parâmetros.

    Returns
    -------
    ModelParams
        Gradientes com o mesmo layout dos parâmetros.
    """
    grads = ModelParams.zeros(params.arch, params.n_rx)
    head = mlp_backward(dlogits, cache.v_final, cache.llr_pre, params.mlp("mlp_llr"))
    _accumulate_mlp(grads, "mlp_llr", head)
    dv = head[0]

    batch, n_tok, d = cache.state.v.shape
    heads, dh = arch.n_heads, arch.d_head
    split = (batch, n_tok, heads, dh)
    q_split = cache.state.q.reshape(split)
    k_split = cache.state.k.reshape(split)
    dq = np.zeros_like(cache.state.q)
    dk = np.zeros_like(cache.state.k)
    idx = np.arange(n_tok)
    off_diag = ~np.eye(n_tok, dtype=bool)[None, :, :, None, None]

    for t in reversed(range(arch.n_layers)):
        lc = cache.layers[t]
        layer = params.layer(t)
        p = layer.prefix
        dv_in = dv.copy() if arch.residual else np.zeros_like(dv)

        mix = mlp_backward(dv, lc.v_update, lc.h_pre, layer.mlp_h)
        _accumulate_mlp(grads, f"{p}.mlp_h", mix)
        dvu = mix[0].reshape(split)

        dalpha = dvu[:, :, None] * lc.v_proj[:, None, :]
        dv_proj = np.einsum("bihc,bijhc->bjhc", dvu, lc.alpha)

        pair = mlp_backward(np.where(off_diag, dalpha, 0.0), lc.prod_s, lc.i_pre, layer.mlp_i)
        _accumulate_mlp(grads, f"{p}.mlp_i", pair)
        dprod_s = pair[0]
        self_ = mlp_backward(dalpha[:, idx, idx], lc.prod_s[:, idx, idx], lc.s_pre, layer.mlp_s)
        _accumulate_mlp(grads, f"{p}.mlp_s", self_)
        dprod_s[:, idx, idx] += self_[0]

        if arch.score_smoothing:
            g1, g2 = cache.grid_shape or (1, 1)
            dgrid, ddw, dpw = smooth_backward(
                dprod_s.reshape(-1, g1, g2, *dprod_s.shape[1:]),
                lc.smooth_pad,
                lc.smooth_dw_out,
                layer.smooth_dw,
                layer.smooth_pw,
            )
            grads.tensors[f"{p}.smooth_dw"] += ddw
            grads.tensors[f"{p}.smooth_pw"] += dpw
            dprod = dgrid.reshape(dprod_s.shape)
        else:
            dprod = dprod_s

        dq_proj = np.einsum("bijhc,bjhc->bihc", dprod, lc.k_proj)
        dk_proj = np.einsum("bijhc,bihc->bjhc", dprod, lc.q_proj)

        grads.tensors[f"{p}.proj_q"] += np.einsum("bnhi,bnhj->hij", q_split, dq_proj)
        grads.tensors[f"{p}.proj_k"] += np.einsum("bnhi,bnhj->hij", k_split, dk_proj)
        grads.tensors[f"{p}.proj_v"] += np.einsum("bnhi,bnhj->hij", lc.v_in.reshape(split), dv_proj)
        dq += np.einsum("bnhj,hij->bnhi", dq_proj, layer.proj_q).reshape(dq.shape)
        dk += np.einsum("bnhj,hij->bnhi", dk_proj, layer.proj_k).reshape(dk.shape)
        dv = dv_in + np.einsum("bnhj,hij->bnhi", dv_proj, layer.proj_v).reshape(dv.shape)

    _accumulate_mlp(grads, "mlp_q", mlp_backward(dq, cache.h_phi, cache.q_pre, params.mlp("mlp_q")))
    key = params.key_prefix
    _accumulate_mlp(grads, key, mlp_backward(dk, cache.h_phi, cache.k_pre, params.mlp(key)))
    _accumulate_mlp(grads, "mlp_v", mlp_backward(dv, cache.u_phi, cache.v_pre, params.mlp("mlp_v")))
    return grads


def batch_loss(batch: TrainingBatch, params: ModelParams, arch: ArchConfig):
    """
    Perda média do lote, com os logits, o gradiente nos logits e o cache do passo direto.

    Returns
    -------
    tuple
        ``(perda, dlogits, cache)``.
    """
    logits, cache = forward_cached(batch.h_est, batch.y, params, arch, batch.grid_shape)
    mask = bit_mask(batch.bits_per_symbol, batch.n_layers, arch.max_bits)
    loss, dlogits = bce_loss(logits, batch.bits, mask)
    return loss, dlogits, cache


def backward(batch: TrainingBatch, params: ModelParams, arch: ArchConfig) -> tuple[float, np.ndarray]:
    """
    Perda média do lote e seu gradiente exato em relação ao vetor achatado de parâmetros.

    Parameters
    ----------
    batch : TrainingBatch
        Amostras com bits verdadeiros (preenchidos até ``arch.max_bits``).
    params : ModelParams
        Parâmetros atuais.
    arch : ArchConfig
        Arquitetura.

    Returns
    -------
    tuple[float, np.ndarray]
        ``(perda, gradiente)``; o gradiente tem o layout de ``params.flatten()``.

    Raises
    ------
    DegenerateColumn
        Propagado do passo direto.
    """
    loss, dlogits, cache = batch_loss(batch, params, arch)
    return loss, backprop_logits(dlogits, cache, params, arch).flatten()
