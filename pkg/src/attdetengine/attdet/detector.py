import numpy as np

from attdetengine.attdet.checkpoint import inspect_checkpoint, load_checkpoint
from attdetengine.attdet.model import forward
from attdetengine.attdet.params import ModelParams
from attdetengine.config.logger import LogFactory
from attdetengine.detectors.base import DetectionResult, Detector, as_batch, finish
from attdetengine.exceptions import CheckpointMismatch, UnsupportedOrder
from attdetengine.modem.constellation import LLR_CLIP_DEFAULT, Constellation


class AttDetDetector(Detector):
    """
    Adapta um modelo AttDet treinado à interface `Detector`.

    As LLRs são os logits do modelo saturados em ``±llr_clip``; os bits abruptos são
    ``logit > 0``. ``σ²`` não é entrada do modelo.

    Parameters
    ----------
    params : ModelParams
        Parâmetros treinados.
    name : str, optional
        Rótulo usado nos resultados.
    llr_clip : float, optional
        Saturação das LLRs.
    grid_shape : tuple[int, int], optional
        Grade de REs, quando o modelo usa suavização de escores. Cada chamada de `detect`
        recebe um número inteiro de grades em ordem C.
    """

    logger = LogFactory.get_logger("AttDetDetector")

    def __init__(
        self,
        params: ModelParams,
        name: str = "attdet",
        llr_clip: float = LLR_CLIP_DEFAULT,
        grid_shape: tuple[int, int] | None = None,
    ) -> None:
        self.params = params
        self.name = name
        self.llr_clip = llr_clip
        self.grid_shape = grid_shape
        if params.arch.score_smoothing and grid_shape is not None:
            self.res_per_call = grid_shape[0] * grid_shape[1]

    @classmethod
    def from_checkpoint(cls, path: str, **kwargs) -> "AttDetDetector":
        """Carrega o checkpoint; sem `grid_shape` explícito, usa a grade gravada no treino."""
        params = load_checkpoint(path)
        kwargs.setdefault("grid_shape", inspect_checkpoint(path).grid_shape)
        cls.logger.info("Loaded AttDet checkpoint %s (N_r=%d, %d parameters).", path, params.n_rx, params.size)
        return cls(params, name=f"attdet({path})", **kwargs)

    def check(self, n_rx: int, n_tx: int, c: Constellation) -> None:
        if n_rx != self.params.n_rx:
            raise CheckpointMismatch(f"{self.name} was trained for N_r={self.params.n_rx}, scenario has N_r={n_rx}.")
        if c.bits_per_symbol > self.params.arch.max_bits:
            raise UnsupportedOrder(
                f"{self.name} supports up to {self.params.arch.max_bits} bits/symbol, {c.order}-QAM needs {c.bits_per_symbol}."
            )

    def detect(self, h_est, y, noise_var, c, h_true=None) -> DetectionResult:
        h, y, _, single = as_batch(h_est, y, noise_var)
        arch = self.params.arch
        logits = forward(h, y, self.params, arch, c.bits_per_symbol, self.grid_shape if arch.score_smoothing else None)
        bits = (logits > 0.0).astype(np.uint8)
        weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
        symbols = c.points[bits.astype(np.int64) @ weights]
        llrs = np.clip(logits, -self.llr_clip, self.llr_clip)
        return finish(llrs, bits, symbols, self.name, single)
