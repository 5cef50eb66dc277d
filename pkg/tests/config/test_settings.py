import pytest

from attdetengine.config.settings import EngineSettings
from attdetengine.exceptions import ConfigError


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Cada teste começa sem instância singleton."""
    monkeypatch.setattr(EngineSettings, "_instance", None)


def test_dotted_lookup(tmp_path):
    """Verifica a leitura por chave pontuada e o valor padrão para chaves ausentes."""
    path = tmp_path / "processo.toml"
    path.write_text('[logging]\nlevel = "ERROR"\ncolor = false\n', encoding="utf-8")
    settings = EngineSettings.set_settings_file(str(path))
    assert settings.get("logging.level") == "ERROR"
    assert settings.get("logging.color") is False
    assert settings.get("logging.inexistente", "x") == "x"
    assert EngineSettings() is settings


def test_invalid_toml_gives_empty_settings(tmp_path):
    """Verifica se um arquivo TOML inválido resulta em configurações vazias."""
    path = tmp_path / "quebrado.toml"
    path.write_text("[logging\nlevel = ", encoding="utf-8")
    assert EngineSettings.set_settings_file(str(path)).data == {}


def test_set_missing_settings_file(tmp_path):
    """Verifica se trocar para um arquivo inexistente levanta ConfigError."""
    with pytest.raises(ConfigError, match="not found"):
        EngineSettings.set_settings_file(str(tmp_path / "nada.toml"))
