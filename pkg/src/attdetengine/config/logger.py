import logging
import tempfile
from pathlib import Path

from colorama import Fore, Style, init

init(autoreset=True)

PROJECT_NAME = "AttDetEngine"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


class ColoredFormatter(logging.Formatter):
    """
    Formatter que colore a mensagem conforme o nível do registro.

    A cor é aplicada a uma cópia formatada da mensagem, sem alterar o `LogRecord`, de modo que
    outros handlers (arquivo, tracking) recebam o texto bruto.

    Attributes
    ----------
    LEVEL_COLOR : dict[int, str]
        Mapeamento nível -> código ANSI do Colorama.
    use_color : bool
        Se False, o formatter se comporta como `logging.Formatter`.
    """

    LEVEL_COLOR: dict[int, str] = {
        logging.DEBUG: Fore.CYAN,
        logging.INFO: Fore.GREEN,
        logging.WARNING: Fore.YELLOW,
        logging.ERROR: Fore.RED,
        logging.CRITICAL: Fore.RED + Style.BRIGHT,
    }

    def __init__(self, fmt: str | None = None, datefmt: str | None = None, use_color: bool = True):
        super().__init__(fmt, datefmt)
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        text = super().format(record)
        if not self.use_color:
            return text
        color = self.LEVEL_COLOR.get(record.levelno, "")
        return f"{color}{text}{Style.RESET_ALL}"


class LogFactory:
    """
    Fábrica centralizada de loggers.

    Na primeira chamada a `get_logger`, o logger raiz é configurado uma única vez a partir da
    seção ``[logging]`` de `EngineSettings`:

      - ``level``: nível mínimo (padrão ``"INFO"``);
      - ``file_fallback``: grava ``app.log`` e ``tracking.log`` em um diretório temporário do
        projeto (padrão True);
      - ``color``: colore a saída do terminal (padrão True).

    Attributes
    ----------
    _loggers : dict[str, logging.Logger]
        Loggers já entregues, por nome.
    _configured : bool
        Indica se o logger raiz já foi configurado.

    Examples
    --------
    >>> logger = LogFactory.get_logger("Exemplo")
    >>> isinstance(logger, logging.Logger)
    True
    """

    _loggers: dict[str, logging.Logger] = {}
    _configured: bool = False

    @classmethod
    def configure(cls) -> None:
        """Configura o logger raiz (idempotente)."""
        if cls._configured:
            return

        root_logger = logging.getLogger()
        level_name = "INFO"
        file_fallback = True
        use_color = True
        try:
            from attdetengine.config.settings import EngineSettings

            settings = EngineSettings()
            level_name = str(settings.get("logging.level", level_name)).upper()
            file_fallback = bool(settings.get("logging.file_fallback", file_fallback))
            use_color = bool(settings.get("logging.color", use_color))
        except Exception as e:
            root_logger.warning("Could not read engine settings, using defaults: %s", e)

        if file_fallback:
            base_dir = Path(tempfile.gettempdir()) / PROJECT_NAME
            log_dir = base_dir / "log"
            tracking_dir = base_dir / "tracking"
            log_dir.mkdir(parents=True, exist_ok=True)
            tracking_dir.mkdir(parents=True, exist_ok=True)

            file_handler = logging.FileHandler(str(log_dir / "app.log"))
            file_handler.setFormatter(ColoredFormatter(LOG_FORMAT, DATE_FORMAT, use_color=False))
            root_logger.addHandler(file_handler)

            tracking_handler = logging.FileHandler(str(tracking_dir / "tracking.log"))
            tracking_handler.setFormatter(
                logging.Formatter(
                    '{"time": "%(asctime)s", "level": "%(levelname)s", '
                    '"logger": "%(name)s", "message": "%(message)s"}',
                    datefmt=DATE_FORMAT,
                )
            )
            root_logger.addHandler(tracking_handler)

        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(ColoredFormatter(LOG_FORMAT, DATE_FORMAT, use_color=use_color))
        root_logger.addHandler(stream_handler)
        root_logger.setLevel(getattr(logging, level_name, logging.INFO))
        cls._configured = True

    @classmethod
    def get_logger(cls, name: str) -> logging.Logger:
        """
        Retorna o logger `name`, configurando o logger raiz na primeira chamada.

        Parameters
        ----------
        name : str
            Nome do logger.

        Returns
        -------
        logging.Logger
            Logger associado ao nome.
        """
        if not cls._configured:
            cls.configure()
        if name not in cls._loggers:
            cls._loggers[name] = logging.getLogger(name)
        return cls._loggers[name]

    @classmethod
    def set_level(cls, level: str) -> None:
        """Altera o nível do logger raiz (usado pela opção ``--verbose`` da CLI)."""
        if not cls._configured:
            cls.configure()
        logging.getLogger().setLevel(getattr(logging, level.upper(), logging.INFO))
