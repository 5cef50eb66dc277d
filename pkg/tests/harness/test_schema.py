import re
from pathlib import Path

import pytest
import toml

from attdetengine.exceptions import ConfigError
from attdetengine.harness.schema import SCHEMA_VERSION, SimConfig, build_sim_config, load_sim_config, print_schema

EXAMPLES = Path(__file__).resolve().parents[2] / "exemplos"


def test_empty_document_uses_defaults():
    """Verifica se um documento vazio produz o experimento padrão."""
    cfg = build_sim_config({})
    assert cfg == SimConfig()
    assert cfg.channel.n_rx == 8
    assert cfg.detectors == ("zf", "mmse")
    assert cfg.kbest.k == 64


def test_sections_are_wired():
    """Verifica se os valores de cada seção chegam às dataclasses correspondentes."""
    cfg = build_sim_config(
        {
            "schema_version": 1,
            "channel": {"n_rx": 4, "n_tx": 2, "seed": 7, "csi_error_var": 0.1},
            "arch": {"d": 16, "n_heads": 2},
            "train": {"orders": [4, 16], "snr_range_db": [0, 10], "grid_shape": [2, 2]},
            "sweep": {"order": 4, "snr_grid_db": [0, 5], "detectors": ["ml", "kbest(8)"], "llr_clip": 8},
            "kbest": {"k": 16},
            "logging": {"level": "debug"},
        },
        source="exp.toml",
    )
    assert cfg.seed == 7
    assert cfg.train.channel == cfg.channel
    assert cfg.train.orders == (4, 16)
    assert cfg.train.snr_range_db == (0.0, 10.0)
    assert cfg.train.grid_shape == (2, 2)
    assert cfg.snr_grid_db == (0.0, 5.0)
    assert cfg.kbest.k == 16
    assert cfg.kbest.llr_clip == 8.0
    assert cfg.arch.d_head == 8
    assert cfg.source == "exp.toml"


@pytest.mark.parametrize(
    ("data", "message"),
    [
        ({"schema_version": 2}, "schema_version"),
        ({"detector": {}}, "Unknown section"),
        ({"sweep": {"snr_grid": [0]}}, "Unknown key"),
        ({"channel": {"n_rx": "8"}}, "integer"),
        ({"channel": {"n_rx": True}}, "integer"),
        ({"arch": {"residual": 1}}, "boolean"),
        ({"sweep": {"detectors": "zf"}}, "array"),
        ({"sweep": {"snr_grid_db": [0, "a"]}}, "invalid item"),
        ({"sweep": {"snr_grid_db": [5, 0]}}, "ascending"),
        ({"channel": {"n_rx": 1, "n_tx": 2}}, "n_rx >= n_tx"),
        ({"logging": {"level": "LOUD"}}, "logging.level"),
        ({"sweep": []}, "table"),
    ],
)
def test_invalid_documents(data: dict, message: str):
    """Verifica se documentos inválidos levantam ConfigError com uma mensagem útil."""
    with pytest.raises(ConfigError, match=message):
        build_sim_config(data)


def test_value_errors_name_the_source():
    """Verifica se erros de valor são prefixados com o arquivo de origem."""
    with pytest.raises(ConfigError, match="^exp.toml: "):
        build_sim_config({"sweep": {"order": 8}}, source="exp.toml")


def test_load_sim_config(tmp_path):
    """Verifica a leitura de um arquivo TOML válido."""
    path = tmp_path / "exp.toml"
    path.write_text('[sweep]\norder = 4\ndetectors = ["ml"]\n', encoding="utf-8")
    cfg = load_sim_config(path)
    assert cfg.order == 4
    assert cfg.source == str(path)


def test_load_missing_and_malformed(tmp_path):
    """Verifica os erros de arquivo ausente e de TOML mal formado."""
    missing = tmp_path / "nada.toml"
    with pytest.raises(ConfigError, match=re.escape(f"Config file not found: {missing}")):
        load_sim_config(missing)
    broken = tmp_path / "quebrado.toml"
    broken.write_text("[sweep\norder = 4\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="Invalid TOML"):
        load_sim_config(broken)


def test_print_schema_round_trip():
    """Verifica se o documento do esquema é TOML válido e reproduz os padrões."""
    text = print_schema()
    data = toml.loads(text)
    assert data["schema_version"] == SCHEMA_VERSION
    assert set(data) == {"schema_version", "channel", "arch", "train", "sweep", "kbest", "logging"}
    assert "# checkpoint_path =" in text
    assert build_sim_config(data) == SimConfig()


@pytest.mark.parametrize("path", sorted(EXAMPLES.glob("*.toml")), ids=lambda p: p.name)
def test_example_experiments_load(path: Path):
    """Verifica se cada experimento de exemplo é válido e se a ordem cabe no modelo treinado."""
    cfg = load_sim_config(path)
    if any(tag.startswith("attdet") for tag in cfg.detectors):
        assert cfg.order.bit_length() - 1 <= cfg.arch.max_bits


def test_example_set_covers_reference_scenarios():
    """Verifica se os exemplos incluem 64-QAM com K-best 256, N_r = 32, erro de CSI e MU-MIMO."""
    configs = [load_sim_config(p) for p in EXAMPLES.glob("*.toml")]
    assert any(c.order == 64 and "kbest" in c.detectors and c.kbest.k == 256 for c in configs)
    assert any(c.channel.n_rx == 32 for c in configs)
    assert any(c.channel.csi_error_var > 0 and "mmse_ideal" in c.detectors for c in configs)
    assert {c.channel.n_tx for c in configs if c.channel.rho_tx == 0.0 and c.channel.csi_error_var > 0} >= {2, 4}
