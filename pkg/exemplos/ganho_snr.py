"""
Compara curvas de BER gravadas por ``attdetengine sweep``.

Exemplos
--------
Afastamento MMSE → ML em dois CSVs (i.i.d. e Kronecker)::

    python exemplos/ganho_snr.py results/ordem_8x2.csv results/kronecker_8x2.csv

Fração do afastamento MMSE → ML recuperada pelo AttDet::

    python exemplos/ganho_snr.py results/attdet_kronecker.csv \
        --candidate "attdet(models/attdet_kronecker.ckpt)"
"""

from collections import defaultdict
from pathlib import Path
from typing import Annotated

import typer

from attdetengine.config.logger import LogFactory
from attdetengine.harness.results import BerPoint, read_results
from attdetengine.harness.simulation import snr_gap_at_ber

logger = LogFactory.get_logger("GanhoSNR")


def curves(path: Path) -> dict[str, list[BerPoint]]:
    """Agrupa os pontos de um CSV de resultados por detector."""
    grouped: dict[str, list[BerPoint]] = defaultdict(list)
    for point in read_results(path):
        grouped[point.detector].append(point)
    return dict(grouped)


def main(
    results: Annotated[list[Path], typer.Argument(help="CSVs de resultados.")],
    baseline: Annotated[str, typer.Option(help="Detector de referência inferior.")] = "mmse",
    reference: Annotated[str, typer.Option(help="Detector de referência superior.")] = "ml",
    candidate: Annotated[str | None, typer.Option(help="Detector avaliado contra o afastamento.")] = None,
    target: Annotated[float, typer.Option(help="BER alvo.")] = 1e-2,
) -> None:
    for path in results:
        by_detector = curves(path)
        gap = snr_gap_at_ber(by_detector[baseline], by_detector[reference], target)
        typer.echo(f"{path}: {baseline} - {reference} = {gap:.2f} dB @ BER {target:g}")
        if candidate is None:
            continue
        remaining = snr_gap_at_ber(by_detector[candidate], by_detector[reference], target)
        recovered = (gap - remaining) / gap if gap > 0 else float("nan")
        typer.echo(f"{path}: {candidate} - {reference} = {remaining:.2f} dB, recovered {recovered:.0%}")
        logger.info("%s recovers %.1f%% of the %s gap.", candidate, 100 * recovered, baseline)


if __name__ == "__main__":
    typer.run(main)
