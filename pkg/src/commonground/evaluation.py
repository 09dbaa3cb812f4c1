"""Evaluation harness: episode datasets, multi-run execution, criteria-based
judging, rater-averaged accuracy, and Cohen's kappa.

A dataset is a directory of episode JSON files (``episodes/*.json``)
optionally accompanied by shared scenario files (``scenarios/*.json``).
Transcripts and labels are JSON-lines; labels are append-only so a human
rater and a judge backend can label the same transcripts independently.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .errors import (
    ClarificationNeeded,
    CommonGroundError,
    ExtractionError,
    BackendError,
    UndefinedMetricError,
)
from .session import EngineConfig, open_session

UNITS = ("object_localization", "unmet_precondition", "recovery_suggestion")

# truth conditions per evaluation unit, used verbatim in judging prompts
DEFAULT_CRITERIA: dict[str, str] = {
    "object_localization": (
        "correct explanation of object(s) mentioned or needed for task "
        "performance being in the world or not."
    ),
    "unmet_precondition": (
        "correct explanation of the preconditions needed for task performance"
    ),
    "recovery_suggestion": (
        "correct movement suggestion for the correct object or statement of "
        "the object not being in the environment."
    ),
}


@dataclass(frozen=True)
class Episode:
    id: str
    unit: str
    scenario: Union[str, dict]
    query: str
    rebuttals: tuple[str, ...] = ()
    ee_pose: Optional[tuple[float, float, float]] = None
    image: Optional[str] = None
    ground_truth_conversation: tuple[dict, ...] = ()
    expected_facts: tuple[str, ...] = ()

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"episode {self.id}: unknown unit {self.unit!r}")
        if not self.query:
            raise ValueError(f"episode {self.id}: empty query")

    @classmethod
    def from_dict(cls, data: dict) -> "Episode":
        return cls(
            id=data["id"],
            unit=data["unit"],
            scenario=data["scenario"],
            query=data["query"],
            rebuttals=tuple(data.get("rebuttals", ())),
            ee_pose=tuple(data["ee_pose"]) if data.get("ee_pose") else None,
            image=data.get("image"),
            ground_truth_conversation=tuple(data.get("ground_truth_conversation", ())),
            expected_facts=tuple(data.get("expected_facts", ())),
        )


@dataclass(frozen=True)
class Transcript:
    episode_id: str
    run_index: int
    unit: str
    dialogue: tuple[dict, ...] = ()
    divergence: Optional[dict] = None
    trace: tuple[dict, ...] = ()
    recovery: Optional[dict] = None
    backend: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def key(self) -> str:
        return f"{self.episode_id}#r{self.run_index}"

    def to_dict(self) -> dict:
        data = asdict(self)
        data["dialogue"] = list(self.dialogue)
        data["trace"] = list(self.trace)
        data["key"] = self.key
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Transcript":
        data = dict(data)
        data.pop("key", None)
        data["dialogue"] = tuple(data.get("dialogue", ()))
        data["trace"] = tuple(data.get("trace", ()))
        return cls(**data)


@dataclass(frozen=True)
class LabelRecord:
    transcript_key: str
    rater: str  # "human" | "judge"
    label: Optional[bool]
    rationale: str = ""

    def to_dict(self) -> dict:
        return {
            "transcript_key": self.transcript_key,
            "rater": self.rater,
            "label": self.label,
            "rationale": self.rationale,
        }


@dataclass(frozen=True)
class Dataset:
    episodes: tuple[Episode, ...]
    scenario_dir: Optional[Path] = None


def load_dataset(root: Union[str, Path]) -> Dataset:
    root = Path(root)
    episode_dir = root / "episodes" if (root / "episodes").is_dir() else root
    paths = sorted(episode_dir.glob("*.json"))
    if not paths:
        raise FileNotFoundError(f"no episode files under {root}")
    episodes = []
    for path in paths:
        episodes.append(Episode.from_dict(json.loads(path.read_text())))
    scenario_dir = root / "scenarios"
    return Dataset(
        episodes=tuple(episodes),
        scenario_dir=scenario_dir if scenario_dir.is_dir() else root,
    )


def run_episodes(
    dataset: Dataset,
    config: Optional[EngineConfig] = None,
    n_runs: int = 1,
    out_path: Optional[Path] = None,
) -> list[Transcript]:
    """Run every episode ``n_runs`` times. Failures are recorded per episode
    and never abort the batch; with the deterministic backend the resulting
    transcripts are identical across runs."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    config = config or EngineConfig()
    transcripts = []
    for episode in dataset.episodes:
        for run_index in range(1, n_runs + 1):
            transcripts.append(_run_one(episode, run_index, dataset, config))
    if out_path is not None:
        write_jsonl(out_path, (t.to_dict() for t in transcripts))
    return transcripts


def _run_one(episode: Episode, run_index: int, dataset: Dataset, config: EngineConfig) -> Transcript:
    backend = {"matcher": config.matcher, "render_style": config.render_style}
    try:
        session = open_session(
            episode.scenario, config, base_dir=dataset.scenario_dir
        )
        if episode.unit == "recovery_suggestion" and session.scene is None and not episode.image:
            raise CommonGroundError(
                "recovery episodes need a simulated scene or an image"
            )
        dialogue: list[dict] = []
        payload = session.post_query(episode.query)
        divergence = payload["explanation"]["divergence"]
        trace = payload["explanation"]["trace"]
        for rebuttal in episode.rebuttals:
            try:
                out = session.post_rebuttal(rebuttal)
                if (
                    out["outcome"]["kind"] == "no_oracle_match"
                    and episode.ee_pose is not None
                ):
                    session.set_ee_pose(episode.ee_pose)
            except ClarificationNeeded as exc:
                session.dialogue.append({"role": "user", "text": rebuttal})
                session.dialogue.append({"role": "robot", "text": exc.message})
        recovery = (
            session.last_outcome.to_payload() if session.last_outcome else None
        )
        return Transcript(
            episode_id=episode.id,
            run_index=run_index,
            unit=episode.unit,
            dialogue=tuple(session.dialogue),
            divergence=divergence,
            trace=tuple(trace),
            recovery=recovery,
            backend=backend,
        )
    except (CommonGroundError, FileNotFoundError, ValueError) as exc:
        return Transcript(
            episode_id=episode.id,
            run_index=run_index,
            unit=episode.unit,
            backend=backend,
            error=str(exc),
        )


# --- judging ---------------------------------------------------------------


def _normalize(text: str) -> str:
    import re

    return re.sub(r"[^a-z0-9]+", " ", text.lower()).strip()


def decisive_turn(dialogue: Sequence[dict]) -> str:
    for turn in reversed(list(dialogue)):
        if turn.get("role") == "robot":
            return turn.get("text", "")
    return ""


def judge(
    transcript: Transcript,
    episode: Episode,
    criteria: Optional[Mapping[str, str]] = None,
    backend: str = "scripted",
    chat=None,
    rater: str = "judge",
) -> LabelRecord:
    """Label one transcript against its episode's ground truth.

    The scripted backend checks that every expected fact (by default the
    whole decisive ground-truth turn) is contained in the robot's decisive
    turn after normalization; content is judged, not wording. The llm backend
    embeds the unit's criteria in a judging prompt.
    """
    if transcript.episode_id != episode.id:
        raise ValueError("transcript does not belong to this episode")
    criteria = dict(criteria or DEFAULT_CRITERIA)
    if transcript.error is not None:
        return LabelRecord(
            transcript.key, rater, False, f"episode errored: {transcript.error}"
        )
    reply = _normalize(decisive_turn(transcript.dialogue))
    if backend == "scripted":
        facts = [
            _normalize(f)
            for f in (
                episode.expected_facts
                or [decisive_turn(episode.ground_truth_conversation)]
            )
        ]
        facts = [f for f in facts if f]
        label = bool(facts) and all(f in reply for f in facts)
        missing = [f for f in facts if f not in reply]
        rationale = (
            "decisive turn contains all expected facts"
            if label
            else f"missing facts: {missing}" if facts else "no ground truth to compare"
        )
        return LabelRecord(transcript.key, rater, label, rationale)
    if backend in ("llm", "llge"):
        from .llm import _ask, _fill, load_prompt

        prompt = _fill(
            load_prompt("judge"),
            criteria=criteria.get(transcript.unit, ""),
            ground_truth=_format_convo(episode.ground_truth_conversation),
            transcript=_format_convo(transcript.dialogue),
        )
        try:
            answer = _ask(chat, prompt)
        except (BackendError, ExtractionError) as exc:
            return LabelRecord(transcript.key, rater, None, f"judge failed: {exc}")
        if isinstance(answer, bool):
            return LabelRecord(transcript.key, rater, answer, "llm judgment")
        return LabelRecord(
            transcript.key, rater, None, f"judge answer was not a boolean: {answer!r}"
        )
    raise ValueError(f"unknown judge backend {backend!r}")


def _format_convo(turns: Iterable[dict]) -> str:
    return "\n".join(f"- {t.get('role', '?')}: {t.get('text', '')}" for t in turns)


# --- metrics ----------------------------------------------------------------


def _label_maps(labels: Iterable[LabelRecord]):
    by_rater: dict[str, dict[str, bool]] = {}
    for record in labels:
        if record.label is None:
            continue
        by_rater.setdefault(record.rater, {})[record.transcript_key] = record.label
    return by_rater


def accuracy(
    labels: Iterable[LabelRecord],
    unit: str,
    units: Mapping[str, str],
    raters: tuple[str, str] = ("human", "judge"),
) -> float:
    """Rater-averaged fraction of true labels for one unit.

    Transcripts labeled by only one rater are excluded pairwise (with a
    warning); zero jointly labeled transcripts is an error, not a zero.
    """
    by_rater = _label_maps(labels)
    a = {k: v for k, v in by_rater.get(raters[0], {}).items() if units.get(k) == unit}
    b = {k: v for k, v in by_rater.get(raters[1], {}).items() if units.get(k) == unit}
    shared = sorted(set(a) & set(b))
    dropped = (set(a) | set(b)) - set(shared)
    if dropped:
        warnings.warn(
            f"{unit}: excluding {len(dropped)} transcripts labeled by only one rater",
            stacklevel=2,
        )
    if not shared:
        raise UndefinedMetricError(f"no jointly labeled transcripts for unit {unit!r}")
    frac_a = sum(a[k] for k in shared) / len(shared)
    frac_b = sum(b[k] for k in shared) / len(shared)
    return (frac_a + frac_b) / 2


def cohen_kappa(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two raters over the same keys.

    Standard two-rater definition: (p_o - p_e) / (1 - p_e) with p_e from the
    raters' marginal label fractions.
    """
    a = _as_label_map(labels_a)
    b = _as_label_map(labels_b)
    if not a or set(a) != set(b):
        raise ValueError("raters must label the same nonempty transcript set")
    keys = sorted(a)
    n = len(keys)
    p_o = sum(a[k] == b[k] for k in keys) / n
    p_e = 0.0
    for value in (True, False):
        p_e += (
            sum(a[k] == value for k in keys)
            / n
            * (sum(b[k] == value for k in keys) / n)
        )
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def _as_label_map(labels) -> dict[str, bool]:
    if isinstance(labels, Mapping):
        return {k: bool(v) for k, v in labels.items()}
    out = {}
    for item in labels:
        if isinstance(item, LabelRecord):
            if item.label is not None:
                out[item.transcript_key] = item.label
        else:
            key, value = item
            out[key] = bool(value)
    return out


def report(
    transcripts: Sequence[Transcript],
    labels: Sequence[LabelRecord],
    baseline_labels: Optional[Sequence[LabelRecord]] = None,
    raters: tuple[str, str] = ("human", "judge"),
) -> dict:
    """Aggregate metrics: per-unit rater-averaged accuracy, overall kappa,
    run counts, backend config, and (optionally) deltas against a baseline
    labeling of the same transcripts."""
    if not labels:
        raise UndefinedMetricError("no labels to report on")
    units = {t.key: t.unit for t in transcripts}
    present_units = [u for u in UNITS if u in set(units.values())]
    unit_rows = []
    for unit in present_units:
        row = {
            "unit": unit,
            "transcripts": sum(1 for t in transcripts if t.unit == unit),
            "accuracy": accuracy(labels, unit, units, raters),
        }
        if baseline_labels:
            base = accuracy(baseline_labels, unit, units, raters)
            row["baseline_accuracy"] = base
            row["delta_points"] = (row["accuracy"] - base) * 100.0
        unit_rows.append(row)
    by_rater = _label_maps(labels)
    kappa = None
    shared = set(by_rater.get(raters[0], {})) & set(by_rater.get(raters[1], {}))
    if shared:
        kappa = cohen_kappa(
            {k: by_rater[raters[0]][k] for k in shared},
            {k: by_rater[raters[1]][k] for k in shared},
        )
    episode_ids = {t.episode_id for t in transcripts}
    return {
        "units": unit_rows,
        "cohen_kappa": kappa,
        "episodes": len(episode_ids),
        "runs": max((t.run_index for t in transcripts), default=0),
        "transcripts": len(transcripts),
        "errors": sum(1 for t in transcripts if t.error),
        "backend": dict(transcripts[0].backend) if transcripts else {},
    }


def format_report(data: dict) -> str:
    lines = []
    lines.append(
        f"episodes: {data['episodes']}   runs: {data['runs']}   "
        f"transcripts: {data['transcripts']}   errors: {data['errors']}"
    )
    header = f"{'unit':<24} {'n':>4} {'accuracy':>9}"
    has_delta = any("delta_points" in row for row in data["units"])
    if has_delta:
        header += f" {'baseline':>9} {'delta':>8}"
    lines.append(header)
    for row in data["units"]:
        line = f"{row['unit']:<24} {row['transcripts']:>4} {row['accuracy'] * 100:>8.2f}%"
        if "delta_points" in row:
            line += f" {row['baseline_accuracy'] * 100:>8.2f}% {row['delta_points']:>+7.2f}"
        lines.append(line)
    if data["cohen_kappa"] is not None:
        lines.append(f"cohen_kappa: {data['cohen_kappa']:.4f}")
    if data.get("backend"):
        lines.append(f"backend: {json.dumps(data['backend'], sort_keys=True)}")
    return "\n".join(lines)


# --- jsonl ------------------------------------------------------------------


def write_jsonl(path: Union[str, Path], rows: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def append_jsonl(path: Union[str, Path], row: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a") as fh:
        fh.write(json.dumps(row, sort_keys=True) + "\n")
        fh.flush()


def read_transcripts(path: Union[str, Path]) -> list[Transcript]:
    return [
        Transcript.from_dict(json.loads(line))
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]


def read_labels(path: Union[str, Path]) -> list[LabelRecord]:
    """Last label wins per (transcript, rater); re-judging supersedes."""
    seen: dict[tuple[str, str], LabelRecord] = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        record = LabelRecord(
            transcript_key=data["transcript_key"],
            rater=data["rater"],
            label=data["label"],
            rationale=data.get("rationale", ""),
        )
        seen[(record.transcript_key, record.rater)] = record
    return list(seen.values())
