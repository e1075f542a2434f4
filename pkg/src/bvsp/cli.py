"""Command-line entry point: every pipeline stage as a subcommand.

Outputs are machine-readable (TSV or line-delimited JSON), floats print
with 6 decimals, and every output file gets a ``<name>.manifest.json``
recording the exact configuration, package versions, and input digests that
produced it, so any artifact can be regenerated.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__, aggregation
from .data_io import FORMATS, fixture_path, load, stats
from .errors import BvspError
from .evaluation import EvalReport, evaluate
from .fewshot import sample_episode, split
from .pipeline import (
    PipelineConfig,
    PredictionRow,
    aggregate_rows,
    build_scorer,
    predict_rows,
    run_on_datasets,
    select_templates,
)
from .quads import IMPLICIT, Polarity, SentimentQuad, project
from .selection import STRATEGIES, CorrelationMatrix
from .templates import example_rendering, get_template, list_templates, parse as parse_target, render

logger = logging.getLogger("bvsp")


# --------------------------------------------------------------------------
# serialization helpers


def _round6(value: float) -> float:
    return round(value, 6)


def _quad_to_json(quad: SentimentQuad) -> dict:
    return {
        "at": None if quad.aspect_term is IMPLICIT else quad.aspect_term,
        "ot": None if quad.opinion_term is IMPLICIT else quad.opinion_term,
        "ac": quad.aspect_category,
        "sp": quad.sentiment_polarity.value,
    }


def _quad_from_json(obj: dict) -> SentimentQuad:
    sp = obj["sp"]
    try:
        polarity = Polarity(sp)
    except ValueError:
        polarity = Polarity[sp]
    return SentimentQuad(
        aspect_term=IMPLICIT if obj.get("at") is None else obj["at"],
        opinion_term=IMPLICIT if obj.get("ot") is None else obj["ot"],
        aspect_category=obj["ac"],
        sentiment_polarity=polarity,
    )


def _rounded_report(report: EvalReport) -> dict:
    def walk(value):
        if isinstance(value, float):
            return _round6(value)
        if isinstance(value, dict):
            return {k: walk(v) for k, v in value.items()}
        if isinstance(value, list):
            return [walk(v) for v in value]
        return value

    return walk(report.to_dict())


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf8")


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, records) -> None:
    lines = [json.dumps(record, sort_keys=True) for record in records]
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(output: Path, command: str, config: dict, inputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs if p and p.exists()},
        "versions": {"bvsp": __version__, "python": sys.version.split()[0]},
    }
    _write_json(Path(str(output) + ".manifest.json"), manifest)


def _matrix_tsv(matrix: CorrelationMatrix) -> str:
    lines = ["\t".join(("template",) + matrix.template_ids)]
    for i, tid in enumerate(matrix.template_ids):
        row = "\t".join(f"{matrix.values[i, j]:.9g}" for j in range(len(matrix.template_ids)))
        lines.append(f"{tid}\t{row}")
    return "\n".join(lines) + "\n"


def _rows_jsonl(rows) -> list[dict]:
    return [
        {
            "sentence_id": row.sentence_id,
            "template_id": row.template_id,
            "quads": [_quad_to_json(q) for q in row.quads],
        }
        for row in rows
    ]


def _final_jsonl(final) -> list[dict]:
    return [
        {"sentence_id": sid, "quads": [_quad_to_json(q) for q in quads]}
        for sid, quads in final
    ]


def _scorer_config(args) -> dict:
    return {
        "scorer": args.scorer,
        "seed": args.seed,
        "endpoint": getattr(args, "endpoint", None),
        "timeout_ms": getattr(args, "timeout_ms", None),
        "top_m": args.top_m,
    }


def _make_scorer(args):
    return build_scorer(
        args.scorer,
        seed=args.seed,
        endpoint=getattr(args, "endpoint", None),
        timeout_ms=getattr(args, "timeout_ms", 10_000),
        top_m=args.top_m,
    )


# --------------------------------------------------------------------------
# subcommands


def _cmd_templates(args) -> int:
    templates = list_templates()
    if args.format == "json":
        payload = [
            {
                "id": t.id,
                "kind": t.kind.value,
                "element_order": [r.value for r in t.element_order],
                "example": example_rendering(t),
            }
            for t in templates
        ]
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = ["id\tkind\telement_order\texample"]
        for t in templates:
            order = "-".join(r.value for r in t.element_order)
            lines.append(f"{t.id}\t{t.kind.value}\t{order}\t{example_rendering(t)}")
        text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(Path(args.out), text)
        _write_manifest(Path(args.out), "templates", {"format": args.format}, [])
    else:
        sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    dataset = load(args.data, format=args.format)
    template = get_template(args.template)
    lines = []
    for sentence in dataset:
        if sentence.quads:
            lines.append(render([project(q) for q in sentence.quads], template).text)
        else:
            lines.append("")
    text = "\n".join(lines) + "\n"
    _write_text(Path(args.out), text)
    _write_manifest(
        Path(args.out),
        "render",
        {"template": args.template, "format": args.format, "data": str(args.data)},
        [Path(args.data)],
    )
    return 0


def _cmd_parse(args) -> int:
    template = get_template(args.template)
    records = []
    with open(args.infile, "r", encoding="utf8") as handle:
        for lineno, line in enumerate(handle, start=1):
            result = parse_target(line.rstrip("\n"), template)
            records.append(
                {
                    "line": lineno,
                    "quads": [
                        {"at": q.x_at, "ot": q.x_ot, "ac": q.x_ac, "sp": q.x_sp}
                        for q in result.quads
                    ],
                    "malformed": result.malformed_count,
                }
            )
    _write_jsonl(Path(args.out), records)
    _write_manifest(
        Path(args.out),
        "parse",
        {"template": args.template, "in": str(args.infile)},
        [Path(args.infile)],
    )
    return 0


def _cmd_select(args) -> int:
    dataset = load(args.support, format=args.format)
    scorer = _make_scorer(args)
    result = select_templates(
        list(dataset),
        scorer,
        args.k,
        strategy=args.strategy,
        seed=args.seed,
        jobs=args.jobs,
    )
    _write_text(Path(args.out), _matrix_tsv(result.matrix))
    config = {
        "k": args.k,
        "strategy": args.strategy,
        "support": str(args.support),
        **_scorer_config(args),
    }
    _write_manifest(Path(args.out), "select", config, [Path(args.support)])
    if args.selected_out:
        _write_json(Path(args.selected_out), {"strategy": args.strategy, "k": args.k, "selected": list(result.selected_ids)})
        _write_manifest(Path(args.selected_out), "select", config, [Path(args.support)])
    for tid in result.selected_ids:
        print(tid)
    return 0


def _cmd_predict(args) -> int:
    dataset = load(args.data, format=args.format)
    if args.selection:
        selected = json.loads(Path(args.selection).read_text("utf8"))["selected"]
    elif args.templates:
        selected = [tid.strip() for tid in args.templates.split(",") if tid.strip()]
    else:
        raise BvspError("predict needs --templates or --selection")
    for tid in selected:
        get_template(tid)  # fail fast on unknown ids
    scorer = _make_scorer(args)
    rows = predict_rows(list(dataset), selected, scorer, jobs=args.jobs)
    _write_jsonl(Path(args.out), _rows_jsonl(rows))
    _write_manifest(
        Path(args.out),
        "predict",
        {"templates": selected, "data": str(args.data), "jobs": args.jobs, **_scorer_config(args)},
        [Path(args.data)] + ([Path(args.selection)] if args.selection else []),
    )
    return 0


def _read_prediction_rows(path: Path) -> list[PredictionRow]:
    rows = []
    with path.open("r", encoding="utf8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            rows.append(
                PredictionRow(
                    sentence_id=str(obj["sentence_id"]),
                    template_id=obj["template_id"],
                    quads=tuple(_quad_from_json(q) for q in obj["quads"]),
                    malformed_count=int(obj.get("malformed", 0)),
                    generated_text=obj.get("generated_text", ""),
                )
            )
    return rows


def _cmd_vote(args) -> int:
    rows = _read_prediction_rows(Path(args.infile))
    final = aggregate_rows(rows, args.tau, strategy="vote")
    _write_jsonl(Path(args.out), _final_jsonl(final))
    _write_manifest(
        Path(args.out),
        "vote",
        {"tau": args.tau, "in": str(args.infile)},
        [Path(args.infile)],
    )
    return 0


def _cmd_eval(args) -> int:
    gold_dataset = load(args.gold, format=args.format)
    gold = [(s.id, s.quads) for s in gold_dataset]
    pred = []
    with open(args.pred, "r", encoding="utf8") as handle:
        for line in handle:
            if not line.strip():
                continue
            obj = json.loads(line)
            pred.append(
                (str(obj["sentence_id"]), tuple(_quad_from_json(q) for q in obj["quads"]))
            )
    report = evaluate(gold, pred, average=args.average)
    _write_json(Path(args.report), _rounded_report(report))
    _write_manifest(
        Path(args.report),
        "eval",
        {"gold": str(args.gold), "pred": str(args.pred), "average": args.average},
        [Path(args.gold), Path(args.pred)],
    )
    print(f"precision={report.precision:.6f} recall={report.recall:.6f} f1={report.f1:.6f}")
    return 0


def _cmd_episodes(args) -> int:
    dataset = load(args.data, format=args.format)
    episodes = []
    for run_seed in range(args.seed, args.seed + args.runs):
        episode = sample_episode(dataset, args.shots, run_seed)
        episodes.append(
            {
                "k": episode.k,
                "seed": episode.seed,
                "support_ids": list(episode.support_ids),
                "query_ids": list(episode.query_ids),
            }
        )
    payload = {"data": str(args.data), "shots": args.shots, "runs": args.runs, "seed": args.seed, "episodes": episodes}
    _write_json(Path(args.out), payload)
    _write_manifest(
        Path(args.out),
        "episodes",
        {"data": str(args.data), "shots": args.shots, "runs": args.runs, "seed": args.seed},
        [Path(args.data)],
    )
    return 0


def _cmd_stats(args) -> int:
    dataset = load(args.data, format=args.format)
    s = stats(dataset)
    header = "\t".join(s.HEADER)
    row = "\t".join(str(v) for v in s.to_row())
    text = header + "\n" + row + "\n"
    if args.out:
        _write_text(Path(args.out), text)
        _write_manifest(Path(args.out), "stats", {"data": str(args.data)}, [Path(args.data)])
    else:
        sys.stdout.write(text)
    return 0


def _cmd_run(args) -> int:
    out_dir = Path(args.out_dir)
    scorer = _make_scorer(args)
    tau = args.tau
    config = PipelineConfig(
        scorer=scorer,
        k_templates=args.k_templates,
        tau=tau,
        selection_strategy=args.strategy,
        aggregation_strategy=args.aggregation,
        seed=args.seed,
        jobs=args.jobs,
    )
    cli_config = {
        "data": str(args.data),
        "episodes": str(args.episodes) if args.episodes else None,
        "shots": args.shots,
        "runs": args.runs,
        "k_templates": args.k_templates,
        "tau": tau,
        "strategy": args.strategy,
        "aggregation": args.aggregation,
        "jobs": args.jobs,
        **_scorer_config(args),
    }
    inputs = [Path(args.data)] + ([Path(args.episodes)] if args.episodes else [])

    dataset = load(args.data, format=args.format)

    if args.shots is None and not args.episodes:
        # Whole-data flow: select on the full set, predict on the full set.
        artifacts = run_on_datasets(dataset, dataset, config)
        _emit_run_artifacts(out_dir, artifacts)
        _write_json(out_dir / "report.json", _rounded_report(artifacts.report))
        for name in ("selection.json", "matrix.tsv", "preds.jsonl", "final.jsonl", "report.json"):
            _write_manifest(out_dir / name, "run", cli_config, inputs)
        print(f"f1={artifacts.report.f1:.6f}")
        return 0

    # Episode protocol: one pipeline run per episode, averaged.
    if args.episodes:
        payload = json.loads(Path(args.episodes).read_text("utf8"))
        from .fewshot import Episode

        episodes = [
            Episode(
                k=e["k"],
                seed=e["seed"],
                support_ids=tuple(e["support_ids"]),
                query_ids=tuple(e["query_ids"]),
            )
            for e in payload["episodes"]
        ]
    else:
        episodes = [
            sample_episode(dataset, args.shots, s) for s in range(args.seed, args.seed + args.runs)
        ]

    reports = []
    for index, episode in enumerate(episodes):
        support, query = split(dataset, episode)
        artifacts = run_on_datasets(support, query, config)
        run_dir = out_dir / f"run-{index}"
        _emit_run_artifacts(run_dir, artifacts)
        _write_json(run_dir / "report.json", _rounded_report(artifacts.report))
        reports.append(artifacts.report)

    from .fewshot import ProtocolReport

    protocol = ProtocolReport(reports=tuple(reports), seeds=tuple(e.seed for e in episodes))
    _write_json(out_dir / "report.json", _round_protocol(protocol))
    _write_manifest(out_dir / "report.json", "run", cli_config, inputs)
    print(
        f"mean_f1={protocol.mean('f1'):.6f} std_f1={protocol.std('f1'):.6f} "
        f"runs={len(reports)}"
    )
    return 0


def _round_protocol(protocol) -> dict:
    payload = protocol.to_dict()
    payload["mean"] = {k: _round6(v) for k, v in payload["mean"].items()}
    payload["std"] = {k: _round6(v) for k, v in payload["std"].items()}
    payload["per_run"] = [_rounded_report(report) for report in protocol.reports]
    return payload


def _emit_run_artifacts(out_dir: Path, artifacts) -> None:
    _write_json(
        out_dir / "selection.json",
        {
            "strategy": artifacts.selection.strategy,
            "selected": list(artifacts.selection.selected_ids),
        },
    )
    _write_text(out_dir / "matrix.tsv", _matrix_tsv(artifacts.selection.matrix))
    _write_jsonl(out_dir / "preds.jsonl", _rows_jsonl(artifacts.rows))
    _write_jsonl(out_dir / "final.jsonl", _final_jsonl(artifacts.final))


# --------------------------------------------------------------------------
# argument parsing


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return number


def _add_scorer_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scorer", choices=("reference", "remote"), default="reference")
    parser.add_argument("--seed", type=int, default=42, help="seed for all randomness")
    parser.add_argument("--endpoint", default=None, help="remote scorer URL (or BVSP_ENDPOINT)")
    parser.add_argument("--timeout-ms", type=_positive_int, default=10_000, dest="timeout_ms")
    parser.add_argument("--top-m", type=_positive_int, default=50, dest="top_m")
    parser.add_argument("--jobs", type=_positive_int, default=1, help="worker threads")


def _add_format_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=FORMATS, default="quad-lines")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bvsp",
        description="Multi-template quad extraction: render, select, predict, vote, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"bvsp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("templates", help="dump the 26-template registry")
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_templates)

    p = sub.add_parser("render", help="render gold quads into target sequences")
    p.add_argument("--data", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--out", required=True)
    _add_format_arg(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("parse", help="parse target sequences back into quads")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--template", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("select", help="build the correlation matrix and select templates")
    p.add_argument("--k", type=_positive_int, default=3)
    p.add_argument("--support", required=True)
    p.add_argument("--out", required=True, help="matrix TSV path")
    p.add_argument("--selected-out", default=None, dest="selected_out")
    p.add_argument("--strategy", choices=STRATEGIES, default="js_min")
    _add_format_arg(p)
    _add_scorer_args(p)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("predict", help="per-template generation and parsing")
    p.add_argument("--data", required=True)
    p.add_argument("--templates", default=None, help="comma-separated template ids")
    p.add_argument("--selection", default=None, help="selection.json from select/run")
    p.add_argument("--out", required=True)
    _add_format_arg(p)
    _add_scorer_args(p)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("vote", help="aggregate per-template predictions by voting")
    p.add_argument("--tau", type=_positive_int, required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_vote)

    p = sub.add_parser("eval", help="exact-match precision/recall/F1")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--average", choices=("micro", "macro"), default="micro")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("episodes", help="sample reproducible support/query episodes")
    p.add_argument("--data", required=True)
    p.add_argument("--shots", type=_positive_int, required=True)
    p.add_argument("--runs", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    _add_format_arg(p)
    p.set_defaults(func=_cmd_episodes)

    p = sub.add_parser("run", help="full pipeline: select, predict, vote, evaluate")
    p.add_argument("--data", default=str(fixture_path()), help="defaults to the bundled fixture")
    p.add_argument("--episodes", default=None, help="episodes.json from the episodes command")
    p.add_argument("--shots", type=_positive_int, default=None)
    p.add_argument("--runs", type=_positive_int, default=5)
    p.add_argument("--k-templates", type=_positive_int, default=3, dest="k_templates")
    p.add_argument("--tau", type=_positive_int, default=None)
    p.add_argument("--strategy", choices=STRATEGIES, default="js_min")
    p.add_argument(
        "--aggregation", choices=aggregation.AGGREGATION_STRATEGIES, default="vote"
    )
    p.add_argument("--out-dir", default="bvsp-out", dest="out_dir")
    _add_format_arg(p)
    _add_scorer_args(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("stats", help="corpus statistics as a TSV row")
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)
    _add_format_arg(p)
    p.set_defaults(func=_cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except BvspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
