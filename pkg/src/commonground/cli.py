"""Command-line front door: one-shot classification, an interactive REPL,
action-graph dumps, evaluation runs, and the HTTP service.

Exit codes: 0 success, 1 runtime error, 2 usage or parse error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .actions import format_blocked
from .errors import (
    ClarificationNeeded,
    CommonGroundError,
    PhaseError,
    UnparseableQueryError,
)
from .evaluation import (
    DEFAULT_CRITERIA,
    append_jsonl,
    format_report,
    judge as judge_transcript,
    load_dataset,
    read_labels,
    read_transcripts,
    report as build_report,
    run_episodes,
    write_jsonl,
)
from .llm import LlmSettings
from .scene import BaseMove
from .session import EngineConfig, open_session


def _engine_config(matcher, llm_endpoint, llm_model, render_style="template") -> EngineConfig:
    llm = None
    if matcher == "llm" or render_style == "llm":
        llm = LlmSettings.from_env(
            endpoint=llm_endpoint, model=llm_model
        )
    return EngineConfig(matcher=matcher, render_style=render_style, llm=llm)


def _scenario_option(f):
    f = click.option("--scenario", "-s", required=True, help="Scenario name or path.")(f)
    return f


def _llm_options(f):
    f = click.option("--llm-endpoint", envvar="COMMONGROUND_LLM_ENDPOINT", default=None)(f)
    f = click.option("--llm-model", envvar="COMMONGROUND_LLM_MODEL", default=None)(f)
    f = click.option(
        "--matcher",
        type=click.Choice(["det", "llm"]),
        default="det",
        show_default=True,
        help="Object/phrase matching backend.",
    )(f)
    return f


@click.group()
def main():
    """Model-reconciliation dialogue engine."""


@main.command()
@_scenario_option
@_llm_options
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.argument("query")
def classify(scenario, matcher, llm_endpoint, llm_model, fmt, query):
    """Classify one query against a scenario and print the explanation."""
    try:
        session = open_session(scenario, _engine_config(matcher, llm_endpoint, llm_model))
        payload = session.post_query(query)
    except UnparseableQueryError as exc:
        raise click.UsageError(str(exc))  # exit code 2
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))  # exit code 1
    explanation = payload["explanation"]
    if fmt == "json":
        click.echo(json.dumps(explanation, indent=2, sort_keys=True))
        return
    click.echo(f"divergence: {explanation['divergence']['code']}")
    for step in explanation["trace"]:
        click.echo(f"  step {step['step']}: {step['outcome']}")
    click.echo(explanation["rendered"])


@main.group()
def actiongraph():
    """Inspect the grounded action graph."""


@actiongraph.command("dump")
@_scenario_option
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def actiongraph_dump(scenario, fmt):
    """Print the blocked-action dictionary (text) or the full graph (json)."""
    try:
        session = open_session(scenario)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc))
    if fmt == "json":
        state = session.state_payload()
        click.echo(json.dumps(state["actions"], indent=2, sort_keys=True))
        return
    click.echo(session.blocked_text())


@main.command()
@_scenario_option
@_llm_options
def repl(scenario, matcher, llm_endpoint, llm_model):
    """Interactive dialogue. 'why ...' asks, anything after an explanation is
    a rebuttal; prefix with :q or :r to force, :state/:graph/:ee/:move/:quit
    are meta commands."""
    try:
        session = open_session(scenario, _engine_config(matcher, llm_endpoint, llm_model))
    except (FileNotFoundError, CommonGroundError) as exc:
        raise click.ClickException(str(exc))
    click.echo(f"scenario {session.scenario_name!r} loaded; ask me something (:quit to leave)")
    while True:
        try:
            line = input("you> ").strip()
        except EOFError:
            click.echo("")
            return
        if not line:
            continue
        try:
            if _repl_meta(session, line):
                continue
        except (CommonGroundError, ValueError) as exc:
            click.echo(f"error: {exc}")
            continue
        if line in (":quit", ":exit"):
            return
        try:
            if line.startswith(":q "):
                payload = session.post_query(line[3:])
            elif line.startswith(":r "):
                payload = session.post_rebuttal(line[3:])
            elif session.phase == "explained" and not line.lower().startswith("why"):
                payload = session.post_rebuttal(line)
            else:
                payload = session.post_query(line)
        except (ClarificationNeeded, UnparseableQueryError, PhaseError) as exc:
            click.echo(f"robot> {getattr(exc, 'message', str(exc))}")
            continue
        click.echo(f"robot> {session.dialogue[-1]['text']}")
        divergence = payload.get("explanation", {}).get("divergence")
        if divergence:
            click.echo(f"       [{divergence['code']}]")


def _repl_meta(session, line) -> bool:
    if line == ":state":
        click.echo(json.dumps(session.state_payload(), indent=2, sort_keys=True))
        return True
    if line == ":graph":
        click.echo(session.blocked_text())
        return True
    if line.startswith(":ee"):
        parts = line.split()
        if len(parts) != 4:
            click.echo("usage: :ee x y z")
            return True
        pose = tuple(float(v) for v in parts[1:])
        session.set_ee_pose(pose)
        click.echo(f"robot> {session.dialogue[-1]['text']}")
        return True
    if line.startswith(":move"):
        parts = line.split()
        if len(parts) == 1:
            session.move_base(None)
        elif len(parts) in (3, 4):
            dtheta = float(parts[3]) if len(parts) == 4 else 0.0
            session.move_base(BaseMove(float(parts[1]), float(parts[2]), dtheta))
        else:
            click.echo("usage: :move [dx dy [dtheta]]")
            return True
        click.echo("base moved; perception re-run")
        return True
    return False


@main.group()
def eval():
    """Run, judge, and report on an episode dataset."""


@eval.command("run")
@click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--runs", default=1, show_default=True, type=int)
@_llm_options
@click.option("--out", default="transcripts.jsonl", show_default=True, type=click.Path())
def eval_run(dataset, runs, matcher, llm_endpoint, llm_model, out):
    """Execute every episode the requested number of times."""
    data = load_dataset(dataset)
    transcripts = run_episodes(
        data, _engine_config(matcher, llm_endpoint, llm_model), n_runs=runs,
        out_path=Path(out),
    )
    errors = sum(1 for t in transcripts if t.error)
    click.echo(f"wrote {len(transcripts)} transcripts to {out} ({errors} errored)")


@eval.command("judge")
@click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--transcripts", "transcripts_path", required=True, type=click.Path(exists=True))
@click.option("--judge", "backend", type=click.Choice(["scripted", "llm"]), default="scripted", show_default=True)
@click.option("--rater", default="judge", show_default=True)
@click.option("--llm-endpoint", envvar="COMMONGROUND_LLM_ENDPOINT", default=None)
@click.option("--llm-model", envvar="COMMONGROUND_LLM_MODEL", default=None)
@click.option("--out", default="labels.jsonl", show_default=True, type=click.Path())
def eval_judge(dataset, transcripts_path, backend, rater, llm_endpoint, llm_model, out):
    """Label transcripts against their episodes' ground truth."""
    data = load_dataset(dataset)
    episodes = {e.id: e for e in data.episodes}
    chat = None
    if backend == "llm":
        from .llm import ChatClient

        chat = ChatClient(LlmSettings.from_env(endpoint=llm_endpoint, model=llm_model))
    n = 0
    for transcript in read_transcripts(transcripts_path):
        episode = episodes.get(transcript.episode_id)
        if episode is None:
            continue
        record = judge_transcript(
            transcript, episode, DEFAULT_CRITERIA, backend=backend, chat=chat, rater=rater
        )
        append_jsonl(out, record.to_dict())
        n += 1
    click.echo(f"appended {n} labels to {out}")


@eval.command("report")
@click.option("--transcripts", "transcripts_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--baseline-labels", "baseline_path", default=None, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
def eval_report(transcripts_path, labels_path, baseline_path, fmt):
    """Per-unit accuracy, Cohen's kappa, and run bookkeeping."""
    transcripts = read_transcripts(transcripts_path)
    labels = read_labels(labels_path)
    baseline = read_labels(baseline_path) if baseline_path else None
    try:
        data = build_report(transcripts, labels, baseline_labels=baseline)
    except CommonGroundError as exc:
        raise click.ClickException(str(exc))
    if fmt == "json":
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        click.echo(format_report(data))


@main.command()
@click.option("--port", default=8080, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--scenario-dir", default=None, type=click.Path(file_okay=False))
@click.option("--ui-dir", default=None, type=click.Path(file_okay=False))
@_llm_options
@click.option("--no-llm", is_flag=True, help="Force the deterministic backend.")
def serve(port, host, scenario_dir, ui_dir, matcher, llm_endpoint, llm_model, no_llm):
    """Serve the session API (and the web cockpit when built)."""
    import uvicorn

    from .scenario import packaged_scenario_dir
    from .service import ServiceConfig, create_app

    if no_llm:
        matcher = "det"
    config = ServiceConfig(
        scenario_dir=Path(scenario_dir) if scenario_dir else packaged_scenario_dir(),
        engine=_engine_config(matcher, llm_endpoint, llm_model),
        ui_dir=Path(ui_dir) if ui_dir else _default_ui_dir(),
    )
    try:
        uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        raise click.ClickException(f"could not serve on {host}:{port}: {exc}")


def _default_ui_dir():
    here = Path(__file__).resolve()
    for parent in here.parents:
        candidate = parent / "frontend" / "dist"
        if candidate.is_dir():
            return candidate
    return None


if __name__ == "__main__":
    main()
