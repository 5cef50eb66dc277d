from pathlib import Path
from typing import Any, Optional

import toml

from attdetengine.exceptions import ConfigError

DEFAULT_SETTINGS_PATHS = [
    "./attdetengine.toml",
    "~/.config/attdetengine/config.toml",
    "/etc/attdetengine/config.toml",
    str(Path(__file__).with_name("config.toml")),
]


class EngineSettings:
    """
    Configurações globais do processo (nível de log, fallback em arquivo, cores).

    Implementa o padrão singleton: a primeira instância procura um arquivo TOML nos caminhos
    padrão (ou no caminho informado) e todas as chamadas seguintes reutilizam os mesmos dados.
    As configurações de experimento (canal, arquitetura, treino, varredura) NÃO moram aqui;
    elas são lidas por `attdetengine.harness.schema`, que valida chaves estritamente.

    Attributes
    ----------
    _instance : Optional[EngineSettings]
        Instância única da classe.
    settings_file : Optional[Path]
        Caminho do arquivo atualmente utilizado, ou None quando nenhum foi encontrado.
    data : dict[str, Any]
        Conteúdo TOML decodificado.

    Examples
    --------
    >>> settings = EngineSettings()
    >>> settings.get("secao.inexistente", default="padrao")
    'padrao'
    """

    _instance: Optional["EngineSettings"] = None

    def __new__(cls, settings_file: str | None = None) -> "EngineSettings":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance.initialize(settings_file)
        return cls._instance

    def initialize(self, settings_file: str | None = None) -> None:
        """
        Localiza e carrega o arquivo de configurações.

        Arquivos ausentes ou ilegíveis resultam em configurações vazias: o processo deve
        funcionar sem nenhum arquivo presente.

        Parameters
        ----------
        settings_file : str or None, optional
            Caminho explícito. Se None, usa DEFAULT_SETTINGS_PATHS.
        """
        if settings_file:
            self.settings_file = Path(settings_file).expanduser()
        else:
            self.settings_file = self._find_default()
        self.data = self._safe_load()

    @staticmethod
    def _find_default() -> Path | None:
        for path in DEFAULT_SETTINGS_PATHS:
            full_path = Path(path).expanduser()
            if full_path.exists():
                return full_path
        return None

    def _safe_load(self) -> dict[str, Any]:
        if self.settings_file is None:
            return {}
        try:
            return self._load()
        except ConfigError:
            return {}

    def _load(self) -> dict[str, Any]:
        """
        Decodifica o arquivo TOML.

        Raises
        ------
        ConfigError
            Se o arquivo não existir ou não for TOML válido.
        """
        try:
            with self.settings_file.open(encoding="utf-8") as file:
                return toml.load(file)
        except FileNotFoundError as e:
            raise ConfigError(f"Settings file '{self.settings_file}' not found.") from e
        except toml.TomlDecodeError as e:
            raise ConfigError(f"Invalid TOML in settings file '{self.settings_file}': {e}") from e

    def get(self, key: str, default: Any = None) -> Any:
        """
        Obtém um valor por chave pontuada (por exemplo, ``"logging.level"``).

        Parameters
        ----------
        key : str
            Chave composta separada por pontos.
        default : Any, optional
            Valor retornado quando a chave não existe.

        Returns
        -------
        Any
            Valor associado à chave ou `default`.
        """
        value: Any = self.data
        for part in key.split("."):
            if isinstance(value, dict) and part in value:
                value = value[part]
            else:
                return default
        return value

    @classmethod
    def set_settings_file(cls, file_path: str) -> "EngineSettings":
        """
        Troca o arquivo de configurações em tempo de execução.

        Parameters
        ----------
        file_path : str
            Novo arquivo TOML.

        Returns
        -------
        EngineSettings
            Nova instância singleton.

        Raises
        ------
        ConfigError
            Se o arquivo não existir.
        """
        new_path = Path(file_path).expanduser()
        if not new_path.exists():
            raise ConfigError(f"Settings file '{new_path}' not found.")
        cls._instance = None
        return cls(file_path)
