"""The `forge` command line: pipeline runs, reward scoring, mask
compilation, dataset inspection, and the review service."""

from __future__ import annotations

import json
import math
import random
import sys
from pathlib import Path

import click

from . import masks as mk
from . import trajectory as tj
from .config import ForgeConfig, load_config
from .gateway import ClientError, MalformedResponse, live_clients, scripted_mock
from .pipeline import SampleInput, run_batch
from .rewards import RolloutRecord, score_group, score_pre_totaled
from .store import DatasetStore
from .trajectory import ImageRef, validate_structure


def _fail(message: str, code: int = 1) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _seeded_id_source(seed: int | None):
    if seed is None:
        from .pipeline import _default_id

        return _default_id
    rng = random.Random(seed)

    def next_id() -> str:
        return f"{rng.getrandbits(128):032x}"

    return next_id


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Path to the JSON config file (or set FORGE_CONFIG).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Trajectory pipeline, reward calculus, and review tooling."""
    ctx.ensure_object(dict)
    try:
        ctx.obj["config"] = load_config(config_path)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        _fail(f"bad config: {exc}")


@main.group()
def pipeline() -> None:
    """Trajectory construction."""


@pipeline.command("run")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True),
              help="SampleInput JSONL, one {instruction, references, category} per line.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output trajectory JSONL.")
@click.option("--mock/--live", default=True,
              help="Scripted offline clients (default) or live HTTP endpoints.")
@click.option("--parallel", default=1, show_default=True,
              help="Maximum in-flight samples.")
@click.option("--seed", default=None, type=int,
              help="Seed for deterministic ids and mock image stubs.")
@click.option("--image-dir", default=None, type=click.Path(),
              help="Directory for content-addressed images (default from config).")
@click.pass_context
def pipeline_run(
    ctx: click.Context,
    input_path: str,
    out_path: str,
    mock: bool,
    parallel: int,
    seed: int | None,
    image_dir: str | None,
) -> None:
    """Run the escalation pipeline over a sample file."""
    config: ForgeConfig = ctx.obj["config"]
    image_dir = image_dir or config.image_dir

    samples = []
    try:
        with open(input_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                data = json.loads(line)
                samples.append(
                    SampleInput(
                        instruction=data["instruction"],
                        references=tuple(
                            ImageRef(uri=r["uri"], content_hash=r["content_hash"])
                            for r in data.get("references", [])
                        ),
                        category=data.get("category"),
                    )
                )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        _fail(f"bad input line: {exc}")

    if mock:
        analyzer, generator = scripted_mock(image_dir, seed=seed or 0)
    else:
        try:
            analyzer, generator = live_clients(
                config.analyzer,
                config.generator,
                image_dir=image_dir,
                templates_dir=config.templates_dir,
                pass_threshold=config.pipeline.pass_threshold,
            )
        except ClientError as exc:
            _fail(str(exc))

    trajectories, stats = run_batch(
        samples,
        analyzer,
        generator,
        config.pipeline,
        parallel=parallel,
        id_source=_seeded_id_source(seed),
    )
    try:
        tj.write_jsonl(out_path, trajectories)
    except OSError as exc:
        _fail(str(exc))
    click.echo(json.dumps(stats.to_json(), sort_keys=True))


@main.group()
def rewards() -> None:
    """Group-relative reward scoring."""


def _score_line(data: dict, config: ForgeConfig) -> dict:
    rollouts = data["rollouts"]
    if not rollouts:
        raise ValueError("empty rollout group")
    pre_totaled = all("r_total" in r for r in rollouts)
    if pre_totaled:
        entries = [(float(r["r_total"]), int(r["n_images"])) for r in rollouts]
        breakdowns = score_pre_totaled(entries, config.rewards.epsilon)
    else:
        records = [
            RolloutRecord(
                trajectory=tj.from_record(r["trajectory"]),
                final_scores=tj.evaluation_from_json(r["final_scores"]),
                text_validities=tuple(r.get("text_validities", [])),
            )
            for r in rollouts
        ]
        breakdowns = score_group(records, config.rewards)
    return {
        "group_id": data["group_id"],
        "breakdowns": [
            {
                "rollout_index": i,
                "r_outcome": None if math.isnan(b.r_outcome) else b.r_outcome,
                "r_format": None if math.isnan(b.r_format) else b.r_format,
                "r_stepwise": None if math.isnan(b.r_stepwise) else b.r_stepwise,
                "r_total": b.r_total,
                "r_final": b.r_final,
                "n_images": b.n_images,
                "competitive": b.competitive,
                "advantage": b.advantage,
            }
            for i, b in enumerate(breakdowns)
        ],
    }


@rewards.command("score")
@click.option("--group", "group_path", required=True, type=click.Path(exists=True),
              help="Input JSONL, one {group_id, rollouts} object per line.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output JSONL of {group_id, breakdowns}.")
@click.pass_context
def rewards_score(ctx: click.Context, group_path: str, out_path: str) -> None:
    """Score rollout groups: penalty, finals, and advantages."""
    config: ForgeConfig = ctx.obj["config"]
    try:
        with open(group_path, encoding="utf-8") as fin, open(
            out_path, "w", encoding="utf-8"
        ) as fout:
            for line in fin:
                if not line.strip():
                    continue
                result = _score_line(json.loads(line), config)
                fout.write(json.dumps(result, sort_keys=True) + "\n")
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        _fail(f"bad group line: {exc}")
    except OSError as exc:
        _fail(str(exc))


@main.group()
def masks() -> None:
    """SFT loss masks."""


@masks.command("compile")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True),
              help="Trajectory JSONL to compile masks for.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output mask JSONL.")
def masks_compile(dataset_path: str, out_path: str) -> None:
    """Compile one loss mask per non-filtered trajectory."""
    compiled = []
    try:
        for traj in tj.read_jsonl(dataset_path):
            if traj.mode == tj.Mode.FILTERED:
                click.echo(f"skipping filtered trajectory {traj.id}", err=True)
                continue
            compiled.append(mk.compile_mask(traj))
        mk.write_jsonl(out_path, compiled)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(f"mask compilation failed: {exc}")
    except OSError as exc:
        _fail(str(exc))
    click.echo(json.dumps(mk.mask_stats(compiled), sort_keys=True))


@main.group()
def dataset() -> None:
    """Dataset statistics and validation."""


@dataset.command("stats")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--ledger", "ledger_path", default=None, type=click.Path())
def dataset_stats(dataset_path: str, ledger_path: str | None) -> None:
    """Print mode/category/verification statistics as JSON."""
    try:
        store = DatasetStore(dataset_path, ledger_path)
    except (ValueError, json.JSONDecodeError) as exc:
        _fail(f"bad dataset: {exc}")
    click.echo(json.dumps(store.stats().to_json(), sort_keys=True))


@dataset.command("validate")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
def dataset_validate(dataset_path: str) -> None:
    """Exit non-zero if any record fails the mode grammar."""
    failures = 0
    try:
        for traj in tj.read_jsonl(dataset_path):
            report = validate_structure(traj)
            if not report.valid:
                failures += 1
                for violation in report.violations:
                    click.echo(f"invalid: {traj.id}: {violation}")
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(f"bad dataset: {exc}")
    if failures:
        _fail(f"{failures} invalid record(s)")
    click.echo("all records valid")


@main.command("serve")
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--ledger", "ledger_path", default=None, type=click.Path())
@click.option("--tokens-file", default=None, type=click.Path(exists=True),
              help="JSON file mapping bearer tokens to annotator ids.")
@click.option("--images-dir", default=None, type=click.Path())
@click.option("--ui-dir", default=None, type=click.Path(),
              help="Built UI bundle served at /.")
@click.option("--allow-overwrite", is_flag=True, default=False,
              help="Permit verdicts on already-rejected trajectories.")
@click.pass_context
def serve(
    ctx: click.Context,
    port: int,
    host: str,
    dataset_path: str,
    ledger_path: str | None,
    tokens_file: str | None,
    images_dir: str | None,
    ui_dir: str | None,
    allow_overwrite: bool,
) -> None:
    """Serve the review API (and UI bundle when present)."""
    import uvicorn

    from .service import create_app, load_tokens

    config: ForgeConfig = ctx.obj["config"]
    tokens_file = tokens_file or config.tokens_file
    if tokens_file is None:
        _fail("a tokens file is required (--tokens-file or config tokens_file)")
    try:
        tokens = load_tokens(tokens_file)
        store = DatasetStore(dataset_path, ledger_path or config.ledger_path)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    app = create_app(
        store,
        tokens,
        images_dir=images_dir or config.image_dir,
        ui_dir=ui_dir,
        allow_overwrite=allow_overwrite,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
