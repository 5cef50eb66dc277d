from dataclasses import dataclass, replace

import numpy as np

from attdetengine.exceptions import ConfigError, DimensionMismatch


@dataclass(frozen=True, eq=False)
class OptimizerState:
    """
    Estado do Adam sobre o vetor achatado de parâmetros.

    Attributes
    ----------
    m, u : np.ndarray
        Primeiro e segundo momentos, mesmo tamanho dos parâmetros.
    t : int
        Passos já aplicados.
    lr, beta1, beta2, eps : float
        Hiperparâmetros.
    """

    m: np.ndarray
    u: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, size: int, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr < 0.0:
            raise ConfigError(f"Learning rate must be >= 0, got {lr}.")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {beta1}, {beta2}.")
        return cls(m=np.zeros(size), u=np.zeros(size), t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: np.ndarray, grads: np.ndarray, opt: OptimizerState) -> tuple[np.ndarray, OptimizerState]:
    """
    Um passo do Adam com correção de viés.

    ``m ← β₁m + (1−β₁)g``, ``u ← β₂u + (1−β₂)g²`` e
    ``θ ← θ − lr·m̂/(√û + ε)`` com ``m̂ = m/(1−β₁ᵗ)`` e ``û = u/(1−β₂ᵗ)``.

    Parameters
    ----------
    params : np.ndarray
        Vetor de parâmetros.
    grads : np.ndarray
        Gradiente com o mesmo layout.
    opt : OptimizerState
        Estado atual (não é modificado).

    Returns
    -------
    tuple[np.ndarray, OptimizerState]
        Novos parâmetros e novo estado.

    Raises
    ------
    DimensionMismatch
        Se os tamanhos divergirem.

    Examples
    --------
    >>> opt = OptimizerState.create(2, lr=0.1)
    >>> theta, opt = adam_step(np.zeros(2), np.array([1.0, -1.0]), opt)
    >>> np.round(theta, 6).tolist(), opt.t
    ([-0.1, 0.1], 1)
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != opt.m.shape:
        raise DimensionMismatch(f"params {params.shape}, grads {grads.shape} and state {opt.m.shape} differ.")
    t = opt.t + 1
    m = opt.beta1 * opt.m + (1.0 - opt.beta1) * grads
    u = opt.beta2 * opt.u + (1.0 - opt.beta2) * grads * grads
    m_hat = m / (1.0 - opt.beta1**t)
    u_hat = u / (1.0 - opt.beta2**t)
    updated = params - opt.lr * m_hat / (np.sqrt(u_hat) + opt.eps)
    return updated, replace(opt, m=m, u=u, t=t)
