import re

from attdetengine.config.logger import LogFactory
from attdetengine.detectors.base import Detector
from attdetengine.detectors.kbest import KBestConfig, KBestDetector
from attdetengine.detectors.linear import MatchedFilterDetector, MmseDetector, ZeroForcingDetector
from attdetengine.detectors.ml import MlDetector
from attdetengine.exceptions import ConfigError
from attdetengine.modem.constellation import LLR_CLIP_DEFAULT

_TAG = re.compile(r"^\s*(?P<kind>[a-z_]+)\s*(?:\((?P<paren>[^)]*)\)|:(?P<colon>.+))?\s*$")


class DetectorRegistry:
    """
    Converte rótulos de detector em instâncias de `Detector`.

    Rótulos aceitos: ``zf``, ``mmse``, ``mmse_ideal``, ``mf``, ``ml``, ``kbest`` (largura da
    seção ``[kbest]``), ``kbest(16)`` ou ``kbest:16``, e ``attdet(caminho)`` ou
    ``attdet:caminho``.

    Attributes
    ----------
    logger : logging.Logger
        Logger de classe.
    kbest : KBestConfig
        Configuração usada por ``kbest`` sem argumento.
    llr_clip : float
        Saturação das LLRs para todos os detectores clássicos.

    Raises
    ------
    ConfigError
        Para rótulos desconhecidos ou mal formados.

    Examples
    --------
    >>> DetectorRegistry().build("kbest(16)").name
    'kbest(16)'
    >>> DetectorRegistry().build("mmse_ideal").name
    'mmse_ideal'
    """

    logger = LogFactory.get_logger("DetectorRegistry")

    def __init__(self, kbest: KBestConfig | None = None, llr_clip: float = LLR_CLIP_DEFAULT) -> None:
        self.kbest = kbest or KBestConfig(llr_clip=llr_clip)
        self.llr_clip = llr_clip

    @staticmethod
    def split(tag: str) -> tuple[str, str | None]:
        """
        Separa ``tipo`` e argumento opcional de um rótulo.

        Examples
        --------
        >>> DetectorRegistry.split("attdet:modelo.ckpt")
        ('attdet', 'modelo.ckpt')
        """
        match = _TAG.match(tag)
        if match is None:
            raise ConfigError(f"Malformed detector tag '{tag}'.")
        arg = match.group("paren") if match.group("paren") is not None else match.group("colon")
        return match.group("kind"), (arg.strip() if arg is not None else None)

    def build(self, tag: str) -> Detector:
        kind, arg = self.split(tag)
        if kind in ("zf", "mmse", "mmse_ideal", "mf", "ml") and arg:
            raise ConfigError(f"Detector '{kind}' takes no argument, got '{tag}'.")
        if kind == "zf":
            return ZeroForcingDetector(self.llr_clip)
        if kind == "mmse":
            return MmseDetector(self.llr_clip)
        if kind == "mmse_ideal":
            return MmseDetector(self.llr_clip, ideal_csi=True)
        if kind == "mf":
            return MatchedFilterDetector(self.llr_clip)
        if kind == "ml":
            return MlDetector(self.llr_clip)
        if kind == "kbest":
            if arg is None:
                return KBestDetector(self.kbest)
            try:
                k = int(arg)
            except ValueError as e:
                raise ConfigError(f"K-best width must be an integer, got '{arg}'.") from e
            return KBestDetector(KBestConfig(k=k, llr_clip=self.kbest.llr_clip))
        if kind == "attdet":
            if not arg:
                raise ConfigError("attdet detector needs a checkpoint path: attdet(path).")
            from attdetengine.attdet.detector import AttDetDetector

            return AttDetDetector.from_checkpoint(arg, llr_clip=self.llr_clip)
        raise ConfigError(f"Unknown detector tag '{tag}'.")

    def build_all(self, tags: list[str]) -> list[Detector]:
        """Constrói todos os detectores antes de qualquer simulação (falha rápida)."""
        if not tags:
            raise ConfigError("No detectors configured.")
        detectors = [self.build(tag) for tag in tags]
        self.logger.info("Detectors ready: %s", ", ".join(d.name for d in detectors))
        return detectors
