"""
Contêiner de checkpoint do AttDet.

Layout (todos os inteiros little-endian)::

    offset  tamanho  campo
    0       8        magic b"ATTDETCK"
    8       4        versão do formato (<u4), atualmente 1
    12      4        tamanho do cabeçalho em bytes (<u4)
    16      n        cabeçalho TOML em UTF-8: [arch] (campos de ArchConfig), n_rx, param_count
                     e, opcionalmente, grid_shape = [G1, G2] (modelos com suavização de escores)
    16+n    8*P      vetor de parâmetros achatado (<f8), na ordem de `param_layout`
    fim-32  32       SHA-256 de todos os bytes anteriores
"""

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import toml

from attdetengine.attdet.params import ArchConfig, ModelParams, param_count
from attdetengine.config.logger import LogFactory
from attdetengine.exceptions import CheckpointMismatch, ConfigError

logger = LogFactory.get_logger("Checkpoint")

MAGIC = b"ATTDETCK"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")
_DIGEST_SIZE = 32


@dataclass(frozen=True)
class CheckpointInfo:
    """Resumo de um checkpoint, produzido por `inspect_checkpoint`."""

    path: str
    version: int
    arch: ArchConfig
    n_rx: int
    param_count: int
    checksum_ok: bool
    sha256: str
    grid_shape: tuple[int, int] | None = None


def encode_checkpoint(params: ModelParams, grid_shape: tuple[int, int] | None = None) -> bytes:
    """Serializa `params` (e a grade de REs usada no treino, se houver) no formato do contêiner."""
    fields = {"n_rx": params.n_rx, "param_count": params.size, "arch": params.arch.to_dict()}
    if grid_shape is not None:
        fields["grid_shape"] = [int(g) for g in grid_shape]
    header = toml.dumps(fields).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header)) + header
    body += np.ascontiguousarray(params.flatten(), dtype="<f8").tobytes()
    return body + hashlib.sha256(body).digest()


def save_checkpoint(path, params: ModelParams, grid_shape: tuple[int, int] | None = None) -> Path:
    """
    Grava o checkpoint de forma atômica (arquivo temporário + rename).

    `grid_shape` registra a grade de REs do treino; o detector carregado a reutiliza para que a
    suavização de escores veja na avaliação a mesma vizinhança vista no treino.

    Returns
    -------
    Path
        Caminho gravado.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(params, grid_shape))
    tmp.replace(path)
    logger.info("Checkpoint saved to %s (%d parameters).", path, params.size)
    return path


def _grid_shape(value) -> tuple[int, int] | None:
    if value is None:
        return None
    g1, g2 = (int(g) for g in value)
    if g1 < 1 or g2 < 1:
        raise ValueError(f"grid_shape must be positive, got {value}")
    return g1, g2


def _parse(raw: bytes):
    if len(raw) < _PREFIX.size + _DIGEST_SIZE:
        raise CheckpointMismatch("Checkpoint file is truncated.")
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointMismatch("Not an AttDet checkpoint (bad magic).")
    header_end = _PREFIX.size + header_len
    if header_end > len(raw) - _DIGEST_SIZE:
        raise CheckpointMismatch("Checkpoint header length exceeds file size.")
    try:
        header = toml.loads(raw[_PREFIX.size : header_end].decode("utf-8"))
        arch = ArchConfig(**header["arch"])
        n_rx = int(header["n_rx"])
        count = int(header["param_count"])
        grid_shape = _grid_shape(header.get("grid_shape"))
    except (toml.TomlDecodeError, UnicodeDecodeError, KeyError, TypeError, ValueError, ConfigError) as e:
        raise CheckpointMismatch(f"Invalid checkpoint header: {e}") from e
    payload = raw[header_end : len(raw) - _DIGEST_SIZE]
    checksum_ok = hashlib.sha256(raw[: len(raw) - _DIGEST_SIZE]).digest() == raw[-_DIGEST_SIZE:]
    return version, arch, n_rx, count, grid_shape, payload, checksum_ok


def _read(path) -> bytes:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Checkpoint file not found: {path}")
    return path.read_bytes()


def load_checkpoint(path, arch: ArchConfig | None = None, n_rx: int | None = None) -> ModelParams:
    """
    Lê e valida um checkpoint.

    Parameters
    ----------
    path : str or Path
        Arquivo do checkpoint.
    arch : ArchConfig, optional
        Arquitetura esperada; se fornecida, deve coincidir com a gravada.
    n_rx : int, optional
        Número de antenas esperado.

    Returns
    -------
    ModelParams
        Parâmetros idênticos bit a bit aos gravados.

    Raises
    ------
    ConfigError
        Se o arquivo não existir.
    CheckpointMismatch
        Versão, checksum, tamanho, arquitetura ou ``n_rx`` incompatíveis.
    """
    version, stored_arch, stored_n_rx, count, _, payload, checksum_ok = _parse(_read(path))
    if version != FORMAT_VERSION:
        raise CheckpointMismatch(f"Unsupported checkpoint version {version}; expected {FORMAT_VERSION}.")
    if not checksum_ok:
        raise CheckpointMismatch(f"Checksum mismatch in {path}; the file is corrupted.")
    if arch is not None and arch != stored_arch:
        raise CheckpointMismatch(f"Checkpoint architecture {stored_arch} differs from expected {arch}.")
    if n_rx is not None and n_rx != stored_n_rx:
        raise CheckpointMismatch(f"Checkpoint was trained for N_r={stored_n_rx}, expected N_r={n_rx}.")
    if count != param_count(stored_arch, stored_n_rx) or len(payload) != 8 * count:
        raise CheckpointMismatch("Parameter vector size does not match the stored architecture.")
    vector = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return ModelParams.unflatten(vector, stored_arch, stored_n_rx)


def inspect_checkpoint(path) -> CheckpointInfo:
    """
    Descreve um checkpoint sem exigir checksum válido.

    Raises
    ------
    CheckpointMismatch
        Se o arquivo não tiver o formato do contêiner.
    """
    raw = _read(path)
    version, arch, n_rx, count, grid_shape, _, checksum_ok = _parse(raw)
    return CheckpointInfo(
        path=str(path),
        version=version,
        arch=arch,
        n_rx=n_rx,
        param_count=count,
        checksum_ok=checksum_ok,
        sha256=raw[-_DIGEST_SIZE:].hex(),
        grid_shape=grid_shape,
    )
