import numpy as np
import pytest

from attdetengine.attdet.checkpoint import save_checkpoint
from attdetengine.attdet.params import ArchConfig, init_params
from attdetengine.detectors.kbest import KBestConfig
from attdetengine.detectors.registry import DetectorRegistry
from attdetengine.exceptions import ConfigError


@pytest.fixture
def registry() -> DetectorRegistry:
    """Registro com largura K-best padrão de 32."""
    return DetectorRegistry(KBestConfig(k=32))


@pytest.mark.parametrize(
    ("tag", "name"),
    [
        ("zf", "zf"),
        ("mmse", "mmse"),
        ("mmse_ideal", "mmse_ideal"),
        ("mf", "mf"),
        ("ml", "ml"),
        ("kbest", "kbest(32)"),
        ("kbest(16)", "kbest(16)"),
        ("kbest:8", "kbest(8)"),
        (" kbest ( 4 ) ", "kbest(4)"),
    ],
)
def test_build_known_tags(registry: DetectorRegistry, tag: str, name: str):
    """Verifica se cada rótulo conhecido gera o detector com o nome esperado."""
    assert registry.build(tag).name == name


@pytest.mark.parametrize("tag", ["lmmse", "zf(2)", "kbest(abc)", "kbest(0)", "attdet", "attdet()", "", "ML"])
def test_build_invalid_tags(registry: DetectorRegistry, tag: str):
    """Verifica se rótulos desconhecidos ou mal formados levantam ConfigError."""
    with pytest.raises(ConfigError):
        registry.build(tag)


def test_build_all_empty(registry: DetectorRegistry):
    """Verifica se uma lista vazia de detectores falha antes de qualquer simulação."""
    with pytest.raises(ConfigError):
        registry.build_all([])


def test_build_attdet_from_checkpoint(registry: DetectorRegistry, tmp_path):
    """Verifica se attdet(caminho) carrega o checkpoint e usa o caminho no nome."""
    arch = ArchConfig(d=8, n_heads=2, n_layers=1, max_bits=4)
    path = save_checkpoint(tmp_path / "modelo.ckpt", init_params(arch, 4, np.random.default_rng(0)))
    detector = registry.build(f"attdet({path})")
    assert detector.name == f"attdet({path})"
    assert detector.params.n_rx == 4


def test_build_attdet_missing_checkpoint(registry: DetectorRegistry, tmp_path):
    """Verifica se um checkpoint inexistente levanta ConfigError com o caminho."""
    missing = tmp_path / "nada.ckpt"
    with pytest.raises(ConfigError, match="nada.ckpt"):
        registry.build(f"attdet:{missing}")
