"""
Simulação de Monte Carlo de curvas de BER não codificada.

Cada ponto ``(detector, SNR)`` é simulado em blocos de ``chunk_size`` REs. O fluxo aleatório
do bloco ``j`` no índice de SNR ``i`` é ``make_rng(seed, i, j)``, o mesmo para todos os
detectores (números aleatórios comuns) e independente do número de processos. Os blocos são
reduzidos na ordem dos índices e a parada é avaliada após cada bloco.
"""

from concurrent.futures import Executor, ProcessPoolExecutor

import numpy as np
import scipy.special

from attdetengine.channel.channel import ChannelConfig, apply_channel, draw_realization, snr_to_noise_var
from attdetengine.channel.rng import make_rng
from attdetengine.config.logger import LogFactory
from attdetengine.detectors.base import Detector
from attdetengine.detectors.registry import DetectorRegistry
from attdetengine.exceptions import AttDetError, ConfigError
from attdetengine.harness.results import BerPoint, write_results
from attdetengine.harness.schema import SimConfig
from attdetengine.modem.constellation import Constellation, build_constellation, map_bits

logger = LogFactory.get_logger("Simulation")


def simulate_chunk(
    channel: ChannelConfig,
    c: Constellation,
    detector: Detector,
    snr_db: float,
    seed: int,
    snr_index: int,
    chunk_index: int,
    size: int,
) -> tuple[int, int]:
    """
    Simula um bloco de REs independentes e conta erros de bit.

    Os sorteios seguem a ordem bits, canal, erro de CSI, ruído.

    Returns
    -------
    tuple[int, int]
        ``(bit_errors, bits_counted)``.
    """
    rng = make_rng(seed, snr_index, chunk_index, name=channel.rng)
    noise_var = snr_to_noise_var(snr_db, channel.n_tx)
    bits = rng.integers(0, 2, size=(size, channel.n_tx, c.bits_per_symbol), dtype=np.uint8)
    x = map_bits(bits.reshape(size, -1), c)
    realization = draw_realization(channel, noise_var, rng, size)
    y = apply_channel(realization.h_true, x, realization.noise_var, rng)
    result = detector.detect(realization.h_est, y, realization.noise_var, c, h_true=realization.h_true)
    return int(np.count_nonzero(result.hard_bits != bits)), bits.size


def _chunk_sizes(chunk_size: int, budget: int) -> list[int]:
    full, rest = divmod(budget, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def check_detector(cfg: SimConfig, detector: Detector, c: Constellation) -> None:
    """
    Valida o detector no cenário e a divisão dos REs em blocos.

    Raises
    ------
    ConfigError
        Se o detector precisar de blocos múltiplos de ``res_per_call`` REs e ``chunk_size`` ou
        ``max_re_per_point`` não forem múltiplos dele.
    CheckpointMismatch, UnsupportedOrder, SearchSpaceTooLarge
        Quando o detector não suporta o cenário.
    """
    detector.check(cfg.channel.n_rx, cfg.channel.n_tx, c)
    multiple = detector.res_per_call
    if cfg.sweep.chunk_size % multiple or cfg.max_re_per_point % multiple:
        raise ConfigError(
            f"{detector.name} detects whole grids of {multiple} REs; chunk_size={cfg.sweep.chunk_size} "
            f"and max_re_per_point={cfg.max_re_per_point} must both be multiples of {multiple}."
        )


def run_point(
    cfg: SimConfig,
    detector: Detector,
    snr_db: float,
    snr_index: int = 0,
    executor: Executor | None = None,
) -> BerPoint:
    """
    Simula um ponto até ``min_bit_errors`` erros ou ``max_re_per_point`` REs.

    Parameters
    ----------
    cfg : SimConfig
        Experimento (canal, modulação, critérios de parada, semente).
    detector : Detector
        Detector avaliado; `check_detector` é chamado antes do primeiro bloco.
    snr_db : float
        SNR do ponto.
    snr_index : int, optional
        Índice do ponto na grade; seleciona os fluxos aleatórios.
    executor : concurrent.futures.Executor, optional
        Executor para simular blocos em paralelo; sem ele, os blocos rodam no processo atual.

    Returns
    -------
    BerPoint
        Contagens do ponto e o critério que encerrou a simulação.

    Raises
    ------
    ConfigError
        Se os blocos não forem compatíveis com ``detector.res_per_call``.
    CheckpointMismatch, UnsupportedOrder, SearchSpaceTooLarge
        Quando o detector não suporta o cenário.
    """
    channel = cfg.channel
    c = build_constellation(cfg.order)
    check_detector(cfg, detector, c)
    sizes = _chunk_sizes(cfg.sweep.chunk_size, cfg.max_re_per_point)
    wave = cfg.sweep.workers if executor is not None else 1
    args = (channel, c, detector, snr_db, cfg.seed, snr_index)

    errors = counted = res = 0
    stop_reason = "budget"
    try:
        for start in range(0, len(sizes), wave):
            indices = range(start, min(start + wave, len(sizes)))
            if executor is None:
                outcomes = [simulate_chunk(*args, j, sizes[j]) for j in indices]
            else:
                futures = [executor.submit(simulate_chunk, *args, j, sizes[j]) for j in indices]
                outcomes = [f.result() for f in futures]
            for j, (chunk_errors, chunk_bits) in zip(indices, outcomes, strict=True):
                errors += chunk_errors
                counted += chunk_bits
                res += sizes[j]
                if errors >= cfg.min_bit_errors:
                    stop_reason = "errors"
                    break
            if stop_reason == "errors":
                break
    except AttDetError:
        logger.exception("Detector %s failed at %.2f dB.", detector.name, snr_db)
        raise
    except Exception as e:
        logger.exception("Unexpected failure simulating %s at %.2f dB.", detector.name, snr_db)
        raise AttDetError(f"Simulation of {detector.name} at {snr_db} dB failed: {e}") from e

    point = BerPoint(detector.name, float(snr_db), errors, counted, res, cfg.seed, stop_reason)
    logger.info(
        "%s @ %.2f dB: ber=%.4e (%d errors / %d bits, %d REs, stop=%s)",
        point.detector,
        point.snr_db,
        point.ber,
        errors,
        counted,
        res,
        stop_reason,
    )
    return point


def build_detectors(cfg: SimConfig, tags=None) -> list[Detector]:
    """
    Constrói e valida todos os detectores antes de qualquer simulação.

    Raises
    ------
    ConfigError
        Se a lista estiver vazia ou algum rótulo for inválido.
    """
    registry = DetectorRegistry(cfg.kbest, cfg.sweep.llr_clip)
    detectors = registry.build_all(list(cfg.detectors if tags is None else tags))
    c = build_constellation(cfg.order)
    for detector in detectors:
        check_detector(cfg, detector, c)
    return detectors


def run_sweep(cfg: SimConfig, detectors: list[Detector] | None = None, write: bool = True) -> list[BerPoint]:
    """
    Varre a grade ``detector × SNR`` com números aleatórios comuns entre detectores.

    Parameters
    ----------
    cfg : SimConfig
        Experimento.
    detectors : list[Detector], optional
        Detectores já construídos; por padrão, os rótulos de ``cfg.detectors``.
    write : bool, optional
        Grava o CSV em ``cfg.output``.

    Returns
    -------
    list[BerPoint]
        Pontos na ordem SNR, depois detector.
    """
    if detectors is None:
        detectors = build_detectors(cfg)
    elif not detectors:
        raise ConfigError("No detectors configured.")
    logger.info(
        "Sweep: %d detector(s) x %d SNR point(s), %d-QAM, %dx%d %s channel, seed %d.",
        len(detectors),
        len(cfg.snr_grid_db),
        cfg.order,
        cfg.channel.n_rx,
        cfg.channel.n_tx,
        cfg.channel.model,
        cfg.seed,
    )
    points: list[BerPoint] = []
    if cfg.sweep.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.sweep.workers) as executor:
            for i, snr_db in enumerate(cfg.snr_grid_db):
                points += [run_point(cfg, d, snr_db, i, executor) for d in detectors]
    else:
        for i, snr_db in enumerate(cfg.snr_grid_db):
            points += [run_point(cfg, d, snr_db, i) for d in detectors]
    if write and cfg.output:
        write_results(points, cfg.output)
    return points


def qpsk_awgn_ber(snr_db):
    """
    BER teórica de QPSK com Gray em AWGN: ``Q(√SNR) = erfc(√(SNR/2)) / 2``.

    `snr_db` é a SNR por símbolo (``E_s/N_0``), a mesma convenção de `snr_to_noise_var` com
    ``N_t = 1``.

    Examples
    --------
    >>> round(float(qpsk_awgn_ber(0.0)), 4)
    0.1587
    """
    snr = 10.0 ** (np.asarray(snr_db, dtype=np.float64) / 10.0)
    return 0.5 * scipy.special.erfc(np.sqrt(snr / 2.0))


def snr_at_ber(points, target_ber: float) -> float:
    """
    SNR em que uma curva cruza `target_ber`, por interpolação linear em ``log10(BER)``.

    Pontos com BER nula são ignorados.

    Raises
    ------
    ValueError
        Se a curva não cruzar o alvo.

    Examples
    --------
    >>> pts = [BerPoint("a", 0.0, 100, 1000, 1, 0, "errors"), BerPoint("a", 10.0, 1, 1000, 1, 0, "errors")]
    >>> snr_at_ber(pts, 0.01)
    5.0
    """
    curve = sorted((p.snr_db, p.ber) for p in points if p.bit_errors > 0)
    target = np.log10(target_ber)
    for (s0, b0), (s1, b1) in zip(curve, curve[1:], strict=False):
        l0, l1 = np.log10(b0), np.log10(b1)
        if l0 >= target >= l1 and l0 != l1:
            return float(s0 + (l0 - target) * (s1 - s0) / (l0 - l1))
    raise ValueError(f"BER curve does not cross {target_ber:g}.")


def snr_gap_at_ber(points_a, points_b, target_ber: float) -> float:
    """
    Diferença de SNR ``snr_a − snr_b`` entre duas curvas no mesmo `target_ber`.

    Um valor positivo indica que a curva `a` precisa de mais SNR que `b`.
    """
    return snr_at_ber(points_a, target_ber) - snr_at_ber(points_b, target_ber)
