"""
relzk command line
Instance generation, timed honest sessions, attack evaluation, transcript audits,
benchmarks, pre-shared randomness export, manifest replay and the run history.

Exit statuses: 0 ok, 2 usage, 3 contract or format violation, 4 audit violations,
5 I/O error, 6 generation failure, 7 protocol abort.
"""

import functools
import logging
import time
from pathlib import Path
from typing import Optional

import click
import numpy as np

from relzk import __version__
from relzk.attacks import PROFILES, build_profile, simulate_attack, simulate_attack_sweep
from relzk.config import get_settings
from relzk.errors import AuditViolationError, ContractViolation, RelzkError
from relzk.graph import build_instance, demo_instance, format_graph_text, read_graph_file, write_graph_file
from relzk.ledger import open_ledger
from relzk.manifest import RunManifest, read_manifest
from relzk.protocol import SessionConfig, honest_provers, required_rounds, run_session, sample_challenge_batch, session_streams
from relzk.randomness import build_node_sequence, write_shared_randomness
from relzk.seeds import seed_pool_for
from relzk.spacetime import audit_records, load_spacetime_config, simulate_timed_session
from relzk.transcript import TranscriptWriter, read_transcript

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 5

SEED = click.IntRange(0, 2**64 - 1)


def recorded(subcommand: str):
    """Map library errors to exit statuses and record the invocation in the ledger"""

    def decorator(fn):
        @functools.wraps(fn)
        def wrapper(**kwargs):
            ledger = open_ledger()
            run_id = ledger.create_run(subcommand, kwargs.get("seed") or 0, kwargs) if ledger else None
            code, status, summary = EXIT_OK, "completed", ""
            try:
                summary = fn(**kwargs) or ""
            except RelzkError as e:
                code, status = e.exit_code, "failed"
                summary = str(e)
                logger.error(f"{subcommand} failed: {e}")
                click.echo(f"error: {e}", err=True)
            except OSError as e:
                code, status = EXIT_IO, "failed"
                summary = str(e)
                logger.error(f"{subcommand} I/O error: {e}")
                click.echo(f"error: {e}", err=True)
            except click.ClickException as e:
                # nested invocations (replay) surface usage errors here
                code, status = e.exit_code, "failed"
                summary = e.format_message()
                e.show()
            except click.exceptions.Exit as e:
                code = e.exit_code
                status = "failed" if code else "completed"
                summary = f"exit={code}"
            if ledger and run_id is not None:
                ledger.finish_run(run_id, status, code, summary)
            if code:
                raise click.exceptions.Exit(code)

        return wrapper

    return decorator


@click.group()
@click.version_option(__version__, prog_name="relzk")
@click.option("--verbose", is_flag=True, help="Debug logging")
def main(verbose: bool):
    """Relativistic two-prover zero-knowledge proofs of 3-colourability"""
    level = logging.DEBUG if verbose else getattr(logging, get_settings().log_level, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.getLogger().setLevel(level)


@main.command()
@click.option("--vertices", type=click.IntRange(min=4), required=True, help="Target vertex count")
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Instance file (stdout if omitted)")
@recorded("gen")
def gen(vertices: int, seed: int, out: Optional[str]):
    """Generate a 3-colourable instance with its colouring"""
    pool = seed_pool_for(vertices)
    instance = build_instance(pool, vertices, np.random.default_rng(seed), allow_near_cliques=len(pool) == 1)
    manifest = RunManifest("gen", seed, params={"vertices": vertices}, outputs={"out": out})
    if out:
        write_graph_file(out, instance.graph, instance.colouring, header=manifest.to_header())
    else:
        click.echo(format_graph_text(instance.graph, instance.colouring, header=manifest.to_header()), nl=False)
    summary = f"|V|={instance.graph.num_vertices} |E|={instance.graph.num_edges}"
    click.echo(summary, err=out is None)
    return summary


@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=click.IntRange(min=1), default=1, show_default=True, help="Soundness parameter")
@click.option("--rounds", type=click.IntRange(min=0), default=None, help="Override 9|E|k")
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Spacetime config")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Transcript file")
@click.option("--strict", is_flag=True, help="Exit 4 on audit violations or rejected rounds")
@recorded("run")
def run(graph_path: str, k: int, rounds: Optional[int], seed: int, config_path: Optional[str], out: Optional[str], strict: bool):
    """Run an honest session on the simulated timed harness"""
    graph, colouring = read_graph_file(graph_path)
    if colouring is None:
        raise ContractViolation(f"no certificate: {graph_path} has no colouring lines")
    spacetime = load_spacetime_config(config_path)
    session = SessionConfig(graph=graph, colouring=colouring, security_k=k, seed=seed, rounds=rounds)

    manifest = RunManifest(
        "run",
        seed,
        params={"k": k, "rounds": rounds, "strict": strict},
        inputs={"graph": graph_path, "config": config_path},
        outputs={"out": out},
    )
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as handle:
            timed = simulate_timed_session(spacetime, session, transcript_sink=TranscriptWriter(handle, manifest.to_header()))
    else:
        timed = simulate_timed_session(spacetime, session)

    result = timed.session
    click.echo(f"rounds={result.rounds_run}")
    click.echo(f"failures={result.failures}")
    click.echo(f"rounds_per_second={result.rounds_per_second:.0f}")
    click.echo(f"simulated_duration_s={timed.simulated_duration_ns / 1e9:.6f}")
    for line in timed.audit.to_lines():
        click.echo(line)
    summary = f"rounds={result.rounds_run} failures={result.failures} violations={len(timed.audit.violations)}"
    if strict and (timed.audit.violations or result.failures):
        raise AuditViolationError(summary)
    return summary


@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--profile", default="fake-colouring", show_default=True, help=f"One of: {', '.join(sorted(PROFILES))}")
@click.option("--rounds", type=click.IntRange(min=1), default=100_000, show_default=True)
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--sweep", type=click.IntRange(min=1), default=1, show_default=True, help="Number of consecutive seeds")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report file")
@recorded("attack")
def attack(graph_path: str, profile: str, rounds: int, seed: int, sweep: int, out: Optional[str]):
    """Exact and sampled pass probability of a cheating profile"""
    graph, colouring = read_graph_file(graph_path)
    strategy = build_profile(profile, graph, seed, colouring)
    if sweep == 1:
        reports = [simulate_attack(graph, strategy, rounds, seed)]
    else:
        reports = simulate_attack_sweep(graph, strategy, rounds, range(seed, seed + sweep))

    lines = list(reports[0].to_lines())
    if sweep > 1:
        covered = sum(report.covers_exact for report in reports)
        lines.extend(f"seed={seed + n} estimate={report.estimate:.6f}" for n, report in enumerate(reports))
        lines.append(f"coverage={covered}/{sweep}")
    manifest = RunManifest(
        "attack",
        seed,
        params={"profile": profile, "rounds": rounds, "sweep": sweep},
        inputs={"graph": graph_path},
        outputs={"out": out},
    )
    if out:
        Path(out).write_text("\n".join(manifest.to_header() + lines) + "\n", encoding="utf-8")
    for line in lines:
        click.echo(line)
    return f"profile={profile} exact={reports[0].exact} estimate={reports[0].estimate:.6f}"


@main.command()
@click.argument("transcript_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Spacetime config")
@click.option("--separation", type=click.FloatRange(min=0, min_open=True), default=None, help="Override separation in metres")
@recorded("audit")
def audit(transcript_path: str, config_path: Optional[str], separation: Optional[float]):
    """Check every round of a transcript against the light cone"""
    cfg = load_spacetime_config(config_path)
    if separation is not None:
        cfg = cfg.with_separation(separation)
    report = audit_records(read_transcript(transcript_path), cfg)
    for line in report.to_lines():
        click.echo(line)
    summary = report.to_lines()[-1]
    if not report.passed:
        raise AuditViolationError(summary)
    return summary


@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Instance (demo if omitted)")
@click.option("--rounds", type=click.IntRange(min=0), default=1_000_000, show_default=True)
@click.option("--seed", type=SEED, default=0, show_default=True)
@recorded("bench")
def bench(graph_path: Optional[str], rounds: int, seed: int):
    """Software throughput of prover answering and full rounds"""
    graph, colouring = read_graph_file(graph_path) if graph_path else demo_instance()
    if colouring is None:
        raise ContractViolation(f"no certificate: {graph_path} has no colouring lines")
    session = SessionConfig(graph=graph, colouring=colouring, seed=seed, rounds=rounds, abort_on_first_failure=False)

    left, _ = honest_provers(session)
    verifier = np.random.default_rng(session_streams(seed).verifier)
    block_size = get_settings().block_size
    answer_s = 0.0
    for start in range(0, rounds, block_size):
        frames = sample_challenge_batch(graph, verifier, min(block_size, rounds - start), start).left_frames()
        began = time.perf_counter()
        left.answer_frames(frames)
        answer_s += time.perf_counter() - began

    result = run_session(session, *honest_provers(session))
    answer_rate = rounds / answer_s if answer_s > 0 else 0.0
    projected = 1_000_000 / result.rounds_per_second if result.rounds_per_second > 0 else 0.0
    click.echo(f"graph |V|={graph.num_vertices} |E|={graph.num_edges}")
    click.echo(f"rounds={rounds}")
    click.echo(f"answer_seconds={answer_s:.6f}")
    click.echo(f"answer_rounds_per_second={answer_rate:.0f}")
    click.echo(f"session_seconds={result.duration_s:.6f}")
    click.echo(f"session_rounds_per_second={result.rounds_per_second:.0f}")
    click.echo(f"projected_seconds_per_million_rounds={projected:.3f}")
    return f"rounds={rounds} session_rounds_per_second={result.rounds_per_second:.0f}"


@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--rounds", type=click.IntRange(min=0), default=None, help="Override 9|E|k")
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="RZK1 file")
@recorded("share")
def share(graph_path: str, k: int, rounds: Optional[int], seed: int, out: str):
    """Export the provers' pre-shared randomness for a session seed"""
    graph, _ = read_graph_file(graph_path)
    count = rounds if rounds is not None else required_rounds(graph.num_edges, k)
    streams = session_streams(seed)
    sequence = build_node_sequence(graph.num_vertices, np.random.default_rng(streams.sequence), graph=graph)
    size = write_shared_randomness(out, sequence, seed, count, round_seed=streams.shared)
    summary = f"rounds={count} window_length={sequence.window_length} bytes={size}"
    click.echo(summary)
    return summary


@main.command()
@click.argument("artefact", type=click.Path(exists=True, dir_okay=False))
@recorded("replay")
def replay(artefact: str):
    """Re-run the command recorded in an artefact's manifest"""
    manifest = read_manifest(artefact)
    argv = manifest.to_argv()
    logger.info(f"Replaying: relzk {' '.join(argv)}")
    code = main.main(args=argv, prog_name="relzk", standalone_mode=False)
    if isinstance(code, int) and code:
        raise click.exceptions.Exit(code)
    return " ".join(argv)


@main.command()
@click.option("--limit", type=click.IntRange(min=1), default=20, show_default=True)
def history(limit: int):
    """List recent runs from the ledger"""
    ledger = open_ledger()
    if ledger is None:
        click.echo("run ledger disabled; set RELZK_LEDGER_URL to record runs")
        return
    for run in ledger.recent_runs(limit):
        click.echo(run.to_line())


if __name__ == "__main__":
    main()
