import functools
import os
from pathlib import Path
from typing import Any, Callable, List, Optional, Sequence

import coloredlogs
import typer
from devtools import pformat

from graphmarket.application.experiments import (
    featural_trend,
    mixture_trend,
    noise_sweep,
    random_split_candidates,
    shuffled_copies,
    trend_rows_csv,
)
from graphmarket.application.protocol import run_session, verify_log
from graphmarket.application.valuation import pairwise_scores, partition_samples, proxy_rank_check, rank_sellers, score_candidates
from graphmarket.graphs.loaders import load_manifest
from graphmarket.utils.errors import GraphMarketError, ValidationError
from graphmarket.utils.objects import RunConfig
from graphmarket.utils.utils import dump_json, matrix_csv_rows, read_ndjson, write_csv, write_json, write_ndjson, write_text

app = typer.Typer(help="Blind valuation of graph datasets between a buyer and sellers.")

ConfigPath = typer.Option(None, "--config", help="JSON config file (default config/valuation_config.json)")
Alpha = typer.Option(None, "--alpha", help="0 rewards similarity, 1 rewards difference")
K = typer.Option(None, "--k", help="random-walk steps per node")
KPrime = typer.Option(None, "--k-prime", help="Laplacian eigenvectors per node")
Seed = typer.Option(None, "--seed")
ProxyNodes = typer.Option(None, "--proxy-nodes")
ProxyP = typer.Option(None, "--proxy-p", help="proxy edge probability")
Prefer = typer.Option(None, "--prefer", help="e.g. d=high,r=high,s=low")
Format = typer.Option(None, "--format", help="json or csv")
Out = typer.Option(None, "--out", help="write the result here instead of stdout")
Threads = typer.Option(None, "--threads")
Verbose = typer.Option(False, "--verbose", "-v")


def handle_errors(command: Callable) -> Callable:
    """Map library errors to exit codes 1 (I/O), 2 (validation) and 3 (verification)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except GraphMarketError as err:
            typer.echo(f"error: {err}", err=True)
            raise typer.Exit(code=err.exit_code)

    return wrapper


def load_config(verbose: bool, config_path: Optional[str], **flags: Any) -> RunConfig:
    level = "DEBUG" if verbose else os.getenv("GRAPHMARKET_LOG_LEVEL", "WARNING").upper()
    coloredlogs.install(level=level, fmt="%(asctime)s %(name)s %(levelname)s %(message)s")
    return RunConfig.load(config_path, **flags)


def emit(text: str, out: Optional[str]) -> None:
    if out is None:
        typer.echo(text)
        return
    write_text(text, out)


def emit_rows(rows: Sequence[Sequence[Any]], out: Optional[str]) -> None:
    if out is None:
        for row in rows:
            typer.echo(",".join(str(cell) for cell in row))
        return
    write_csv(rows, out)


@app.command()
@handle_errors
def value(
    buyer: str,
    seller: str,
    trace: Optional[str] = typer.Option(None, "--trace", help="write the message log as NDJSON"),
    config_path: Optional[str] = ConfigPath,
    alpha: Optional[float] = Alpha,
    k: Optional[int] = K,
    k_prime: Optional[int] = KPrime,
    seed: Optional[int] = Seed,
    proxy_nodes: Optional[int] = ProxyNodes,
    proxy_p: Optional[float] = ProxyP,
    output_format: Optional[str] = Format,
    out: Optional[str] = Out,
    threads: Optional[int] = Threads,
    verbose: bool = Verbose,
) -> None:
    """
    Value one seller's dataset for one buyer
    """
    config = load_config(
        verbose, config_path, alpha=alpha, k=k, k_prime=k_prime, seed=seed,
        proxy_nodes=proxy_nodes, proxy_p=proxy_p, format=output_format, threads=threads,
    )
    report, log = run_session(load_manifest(buyer), load_manifest(seller), config)
    if trace is not None:
        write_ndjson([message.to_json() for message in log], trace)

    flat = report.flat()
    if config.format == "csv":
        emit_rows([["S", "D", "R", "gwd", "epsilon_hat_max"], ["" if flat[key] is None else flat[key] for key in ("S", "D", "R", "gwd", "epsilon_hat_max")]], out)
    elif out is not None:
        write_json(flat, out)
    else:
        typer.echo(dump_json(flat))


def seller_id(path: str, taken: List[str]) -> str:
    stem = Path(path).stem
    return stem if stem not in taken else path


@app.command()
@handle_errors
def rank(
    buyer: str,
    sellers: List[str],
    config_path: Optional[str] = ConfigPath,
    alpha: Optional[float] = Alpha,
    k: Optional[int] = K,
    k_prime: Optional[int] = KPrime,
    seed: Optional[int] = Seed,
    proxy_nodes: Optional[int] = ProxyNodes,
    proxy_p: Optional[float] = ProxyP,
    prefer: Optional[str] = Prefer,
    output_format: Optional[str] = Format,
    out: Optional[str] = Out,
    threads: Optional[int] = Threads,
    verbose: bool = Verbose,
) -> None:
    """
    Rank several sellers by their average rank over D, R and S
    """
    config = load_config(
        verbose, config_path, alpha=alpha, k=k, k_prime=k_prime, seed=seed, proxy_nodes=proxy_nodes,
        proxy_p=proxy_p, prefer=prefer, format=output_format, threads=threads,
    )
    if len(sellers) < 2:
        raise ValidationError("rank needs at least 2 sellers")
    ids: List[str] = []
    for path in sellers:
        ids.append(seller_id(path, ids))
    reports = score_candidates(load_manifest(buyer), [load_manifest(path) for path in sellers], config)
    ranking = rank_sellers(list(zip(ids, reports)), config.prefer)

    if config.format == "json":
        emit(dump_json(ranking.model_dump()), out)
        return
    metrics = [metric for metric in ("d", "r", "s") if metric in ranking.per_metric_ranks[ids[0]]]
    rows = [["position", "seller"] + [f"rank_{metric}" for metric in metrics] + ["average_rank"]]
    for position, name in enumerate(ranking.final_order, start=1):
        ranks = ranking.per_metric_ranks[name]
        rows.append([position, name] + [ranks[metric] for metric in metrics] + [ranking.average_rank[name]])
    emit_rows(rows, out)


@app.command()
@handle_errors
def matrix(
    manifests: List[str],
    s_out: Optional[str] = typer.Option(None, "--s-out", help="also write the S matrix as CSV"),
    config_path: Optional[str] = ConfigPath,
    alpha: Optional[float] = Alpha,
    k: Optional[int] = K,
    k_prime: Optional[int] = KPrime,
    seed: Optional[int] = Seed,
    proxy_nodes: Optional[int] = ProxyNodes,
    proxy_p: Optional[float] = ProxyP,
    output_format: Optional[str] = Format,
    out: Optional[str] = Out,
    threads: Optional[int] = Threads,
    verbose: bool = Verbose,
) -> None:
    """
    Pairwise GWD between datasets, as CSV with a header row of dataset names
    """
    config = load_config(
        verbose, config_path, alpha=alpha, k=k, k_prime=k_prime, seed=seed,
        proxy_nodes=proxy_nodes, proxy_p=proxy_p, format=output_format or "csv", threads=threads,
    )
    names: List[str] = []
    for path in manifests:
        names.append(seller_id(path, names))
    gwd, disparity = pairwise_scores([load_manifest(path) for path in manifests], config)

    if config.format == "json":
        emit(dump_json({"names": names, "gwd": gwd.tolist(), "s": disparity.tolist()}), out)
        return
    emit_rows(matrix_csv_rows(names, gwd), out)
    if s_out is not None:
        write_csv(matrix_csv_rows(names, disparity), s_out)


@app.command()
@handle_errors
def proxy_check(
    manifest: str,
    candidates: int = typer.Option(3, "--candidates", help="subgraphs ranked against the baseline"),
    copies: bool = typer.Option(False, "--copies", help="candidates are node-shuffled copies of the whole graph"),
    config_path: Optional[str] = ConfigPath,
    k: Optional[int] = K,
    k_prime: Optional[int] = KPrime,
    seed: Optional[int] = Seed,
    proxy_nodes: Optional[int] = ProxyNodes,
    proxy_p: Optional[float] = ProxyP,
    out: Optional[str] = Out,
    threads: Optional[int] = Threads,
    verbose: bool = Verbose,
) -> None:
    """
    Compare candidate ranks computed through the proxy with ranks from direct matching
    """
    config = load_config(
        verbose, config_path, k=k, k_prime=k_prime, seed=seed,
        proxy_nodes=proxy_nodes, proxy_p=proxy_p, threads=threads,
    )
    source = load_manifest(manifest)[0]
    if copies:
        baseline, candidate_sets = shuffled_copies(source, candidates, config.seed)
    else:
        baseline, candidate_sets = random_split_candidates(source, candidates, config.seed)
    check = proxy_rank_check(baseline, candidate_sets, config)

    rows = [["candidate", "proxy_gwd", "direct_gwd", "proxy_rank", "direct_rank"]]
    for i in range(len(candidate_sets)):
        rows.append([i + 1, repr(check.proxy_gwd[i]), repr(check.direct_gwd[i]), check.proxy_ranks[i], check.direct_ranks[i]])
    emit_rows(rows, out)
    typer.echo(f"spearman: {check.spearman}")


@app.command()
@handle_errors
def verify(trace: str, verbose: bool = Verbose) -> None:
    """
    Recompute S, D and R from a message log and check the embedded report
    """
    load_config(verbose, None)
    report = verify_log(read_ndjson(trace))
    typer.echo(f"trace verified: S {report.s.s!r}")


@app.command("featural-trend")
@handle_errors
def featural_trend_cmd(
    experiment: str = typer.Option("classes", "--experiment", help="classes, mixture or noise"),
    repetitions: int = typer.Option(1, "--repetitions"),
    seed: Optional[int] = Seed,
    out: Optional[str] = Out,
    verbose: bool = Verbose,
) -> None:
    """
    Print plot-ready (seller, D, R) rows for a synthetic featural experiment
    """
    config = load_config(verbose, None, seed=seed)
    runners = {"classes": featural_trend, "mixture": mixture_trend, "noise": noise_sweep}
    if experiment not in runners:
        raise ValidationError(f"unknown experiment {experiment!r}, expected one of {', '.join(runners)}")
    if repetitions < 1:
        raise ValidationError("repetitions must be at least 1")

    rows: List[List[str]] = []
    for repetition in range(repetitions):
        run_seed = config.seed + repetition
        table = trend_rows_csv(runners[experiment](run_seed), repetition=run_seed if repetitions > 1 else None)
        rows.extend(table if not rows else table[1:])
    emit_rows(rows, out)


@app.command()
@handle_errors
def partition(
    baseline: str,
    pool: str,
    groups: int = typer.Option(5, "--groups"),
    config_path: Optional[str] = ConfigPath,
    alpha: Optional[float] = Alpha,
    k: Optional[int] = K,
    k_prime: Optional[int] = KPrime,
    seed: Optional[int] = Seed,
    proxy_nodes: Optional[int] = ProxyNodes,
    proxy_p: Optional[float] = ProxyP,
    prefer: Optional[str] = Prefer,
    out: Optional[str] = Out,
    threads: Optional[int] = Threads,
    verbose: bool = Verbose,
) -> None:
    """
    Score every graph of a pool against a baseline and cut the ranking into sets, best first
    """
    config = load_config(
        verbose, config_path, alpha=alpha, k=k, k_prime=k_prime, seed=seed, proxy_nodes=proxy_nodes,
        proxy_p=proxy_p, prefer=prefer, threads=threads,
    )
    sets = partition_samples(load_manifest(baseline), load_manifest(pool), config, groups=groups)
    emit(pformat({f"set {i}": members for i, members in enumerate(sets, start=1)}), out)


if __name__ == "__main__":
    app()
