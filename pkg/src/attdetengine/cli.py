"""
Linha de comando ``attdetengine``.

Subcomandos: ``train``, ``sweep``, ``eval``, ``gradcheck`` e ``inspect``; ``--print-schema``
imprime o esquema dos arquivos de experimento e ``--settings`` troca o arquivo de
configurações do processo. Códigos de saída: 0 sucesso, 1 configuração inválida, 2 falha
de execução, 3 reprovação em verificação de aceitação. Toda falha escreve uma única linha
em stderr::

    attdetengine: error kind=<tipo> code=<n> message="<texto>"
"""

import sys
from dataclasses import replace
from pathlib import Path
from typing import Annotated

import click
import typer

from attdetengine.attdet.checkpoint import inspect_checkpoint, load_checkpoint
from attdetengine.config.logger import LogFactory
from attdetengine.config.settings import EngineSettings
from attdetengine.exceptions import AttDetError, CheckpointMismatch, ConfigError, GateFailure
from attdetengine.harness.results import points_to_frame
from attdetengine.harness.schema import SimConfig, load_sim_config, print_schema
from attdetengine.harness.simulation import build_detectors, run_point, run_sweep
from attdetengine.training import trainer
from attdetengine.training.gradcheck import GRADCHECK_THRESHOLD, SMOOTHING_GRID, gradcheck_preset, run_grad_check

logger = LogFactory.get_logger("CLI")

PROG_NAME = "attdetengine"
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_GATE = 3
DEFAULT_CHECKPOINT = "attdet.ckpt"

app = typer.Typer(
    name=PROG_NAME,
    help="Laboratório de detecção MIMO: detectores clássicos, AttDet e curvas de BER.",
    add_completion=False,
    no_args_is_help=False,
)

ConfigArg = Annotated[Path, typer.Argument(help="Arquivo de experimento (TOML).")]


def _load(config: Path) -> SimConfig:
    cfg = load_sim_config(config)
    LogFactory.set_level(cfg.logging.level)
    return cfg


@app.callback(invoke_without_command=True)
def main_callback(
    ctx: typer.Context,
    show_schema: Annotated[
        bool, typer.Option("--print-schema", help="Imprime o esquema dos arquivos de experimento.")
    ] = False,
    settings: Annotated[
        Path | None, typer.Option("--settings", help="Arquivo TOML com as configurações do processo ([logging]).")
    ] = None,
    verbose: Annotated[bool, typer.Option("--verbose", "-v", help="Log em nível DEBUG.")] = False,
) -> None:
    if settings is not None:
        loaded = EngineSettings.set_settings_file(str(settings))
        LogFactory.set_level(str(loaded.get("logging.level", "INFO")))
        logger.debug("Process settings read from %s.", loaded.settings_file)
    if verbose:
        LogFactory.set_level("DEBUG")
    if show_schema:
        typer.echo(print_schema(), nl=False)
        raise typer.Exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        raise click.UsageError("Missing command (train, sweep, eval, gradcheck or inspect).")


@app.command("train")
def train_command(
    config: ConfigArg,
    checkpoint: Annotated[Path | None, typer.Option(help="Destino do checkpoint.")] = None,
    log: Annotated[Path | None, typer.Option(help="CSV de log do treino.")] = None,
    resume: Annotated[Path | None, typer.Option(help="Checkpoint de partida.")] = None,
) -> None:
    """Treina o AttDet e grava o checkpoint final."""
    cfg = _load(config)
    ckpt = str(checkpoint) if checkpoint else cfg.train.checkpoint_path or DEFAULT_CHECKPOINT
    train_cfg = replace(cfg.train, checkpoint_path=ckpt, log_path=str(log) if log else cfg.train.log_path)
    params = load_checkpoint(resume, cfg.arch, cfg.channel.n_rx) if resume else None
    _, history = trainer.train(train_cfg, cfg.arch, params)
    last = history.iloc[-1]
    typer.echo(
        f"steps={int(last['step'])} samples={int(last['samples_seen'])} loss={last['loss']:.6f} "
        f"eval_ber={last['eval_ber']:.4e} checkpoint={ckpt}"
    )


@app.command("sweep")
def sweep_command(
    config: ConfigArg,
    output: Annotated[Path | None, typer.Option(help="CSV de resultados.")] = None,
    workers: Annotated[int | None, typer.Option(min=1, help="Processos por ponto.")] = None,
) -> None:
    """Simula a grade detector x SNR e grava o CSV de resultados."""
    cfg = _load(config)
    sweep = cfg.sweep
    if output is not None:
        sweep = replace(sweep, output=str(output))
    if workers is not None:
        sweep = replace(sweep, workers=workers)
    points = run_sweep(replace(cfg, sweep=sweep))
    typer.echo(points_to_frame(points).to_string(index=False))


@app.command("eval")
def eval_command(
    config: ConfigArg,
    detector: Annotated[str, typer.Option(help="Rótulo do detector, ex. kbest(16).")],
    snr: Annotated[float, typer.Option(help="SNR em dB.")],
) -> None:
    """Simula um único ponto e imprime a linha do CSV."""
    cfg = _load(config)
    (built,) = build_detectors(cfg, [detector])
    grid = list(cfg.snr_grid_db)
    index = grid.index(snr) if snr in grid else 0
    point = run_point(cfg, built, snr, index)
    typer.echo(points_to_frame([point]).to_csv(index=False), nl=False)


@app.command("gradcheck")
def gradcheck_command(
    small: Annotated[bool, typer.Option("--small", help="Configuração pequena (padrão).")] = False,
    default: Annotated[bool, typer.Option("--default", help="Configuração maior, por amostragem.")] = False,
    smoothing: Annotated[bool, typer.Option("--smoothing", help="Ativa a suavização de escores (grade 3x3).")] = False,
    seed: Annotated[int, typer.Option(help="Semente.")] = 0,
    eps: Annotated[float, typer.Option(help="Passo das diferenças finitas.")] = 1e-5,
) -> None:
    """Compara o gradiente analítico com diferenças finitas centrais."""
    if small and default:
        raise ConfigError("Choose either --small or --default.")
    arch, channel = gradcheck_preset("default" if default else "small", smoothing, seed)
    report = run_grad_check(arch, channel, eps, grid_shape=SMOOTHING_GRID if smoothing else None)
    typer.echo(
        f"max_rel_error={report.max_rel_error:.3e} worst={report.worst_param} "
        f"checked={report.n_checked}/{report.n_params} kinks={report.n_kinks}"
    )
    if not report.passed:
        raise GateFailure(f"max_rel_error {report.max_rel_error:.3e} is not below {GRADCHECK_THRESHOLD:g}.")


@app.command("inspect")
def inspect_command(
    checkpoint: Annotated[Path, typer.Argument(help="Arquivo de checkpoint.")],
) -> None:
    """Mostra arquitetura, N_r, número de parâmetros e o estado do checksum."""
    info = inspect_checkpoint(checkpoint)
    typer.echo(f"path={info.path}")
    typer.echo(f"format_version={info.version}")
    for key, value in info.arch.to_dict().items():
        typer.echo(f"arch.{key}={value}")
    typer.echo(f"n_rx={info.n_rx}")
    typer.echo(f"param_count={info.param_count}")
    if info.grid_shape is not None:
        typer.echo(f"grid_shape={info.grid_shape[0]}x{info.grid_shape[1]}")
    typer.echo(f"checksum={'ok' if info.checksum_ok else 'FAILED'} sha256={info.sha256}")
    if not info.checksum_ok:
        raise CheckpointMismatch(f"Checksum mismatch in {checkpoint}.")


def _report(error: BaseException, code: int) -> int:
    message = " ".join(str(error).split()).replace('"', '\\"')
    typer.echo(f'{PROG_NAME}: error kind={type(error).__name__} code={code} message="{message}"', err=True)
    return code


def cli(argv: list[str] | None = None) -> int:
    """
    Executa a CLI e devolve o código de saída, sem encerrar o processo.

    Examples
    --------
    >>> cli(["gradcheck", "--small", "--default"])
    1
    """
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = app(args=args, prog_name=PROG_NAME, standalone_mode=False)
    except GateFailure as e:
        return _report(e, EXIT_GATE)
    except (ConfigError, click.ClickException) as e:
        return _report(e, EXIT_CONFIG)
    except AttDetError as e:
        return _report(e, EXIT_RUNTIME)
    except Exception as e:
        logger.exception("Unexpected failure running %s.", args)
        return _report(e, EXIT_RUNTIME)
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
