"""Command-line interface for the corpus and evaluation pipeline.

Stages mirror the library: ``ingest`` checks a raw dataset against the
published reference statistics, ``build`` turns it into an ExampleSet file,
``evaluate`` runs a generation client over that file and writes a report,
``report`` re-renders a finished run, and ``make-fixture`` writes the
synthetic layout-faithful datasets used by the test suite.

Exit codes: 0 success; 1 ingest completed but statistics mismatch the
reference table; 2 pre-flight failure (unreadable input, bad config,
unreachable backend).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from .apimetrics import render_tables
from .corpus import (
    REFERENCE_STATS,
    CorpusError,
    Dataset,
    corpus_stats,
    load_bitod,
    load_ketod,
    load_sgd,
    validate_corpus,
)
from .fixtures import write_fixture
from .prompts import PromptConfig, TemplateKind, render_prompt
from .runner import (
    ROWS_FILENAME,
    ClientUnreachable,
    ConfigInvalid,
    EvalConfig,
    evaluate,
    generate_report,
    load_report_rows,
    make_client,
)
from .transform import BuildConfig, build_examples, read_examples, write_examples

log = logging.getLogger(__name__)


def _load_dataset(dataset: str, root: str, language: str):
    if dataset == "sgd":
        return load_sgd(root)
    if dataset == "ketod":
        return load_ketod(root)
    return load_bitod(root, language_filter=language)


def _meta_path(examples_path: Path) -> Path:
    return examples_path.parent / (examples_path.stem + ".meta.json")


def cmd_ingest(args) -> int:
    schemas, dialogs = _load_dataset(args.dataset, args.directory, args.language)
    overall = corpus_stats(dialogs)
    split_selection, expected = REFERENCE_STATS[Dataset(args.dataset)]
    if split_selection == "all":
        selected = dialogs
    else:
        selected = [d for d in dialogs if d.source_split == split_selection]
    stats = corpus_stats(selected)

    print(f"dataset: {args.dataset}")
    print(f"loaded (all splits): {overall.n_dialogs} dialogs, "
          f"{overall.n_domains} base domains, "
          f"avg {overall.avg_turns_per_dialog:.4f} turns/dialog")
    if split_selection != "all":
        print(f"split '{split_selection}': {stats.n_dialogs} dialogs, "
              f"{stats.n_domains} base domains, "
              f"avg {stats.avg_turns_per_dialog:.4f} turns/dialog")
    matches = (
        stats.n_dialogs == expected.n_dialogs
        and stats.n_domains == expected.n_domains
        and abs(stats.avg_turns_per_dialog - expected.avg_turns_per_dialog)
        <= 0.01
    )
    scope = "all splits" if split_selection == "all" else f"split '{split_selection}'"
    print(f"reference ({scope}): {expected.n_dialogs} dialogs, "
          f"{expected.n_domains} domains, "
          f"avg {expected.avg_turns_per_dialog:.2f} "
          f"-> {'MATCH' if matches else 'MISMATCH'}")
    if overall.n_domains != stats.n_domains:
        print(f"note: the full corpus spans {overall.n_domains} base domains "
              f"while the reference row counts the {stats.n_domains} of "
              f"{scope}; both readings are reported deliberately.")
    problems = validate_corpus(schemas, dialogs)
    if problems:
        print(f"annotation problems: {len(problems)}")
        for problem in problems[:5]:
            print(f"  {problem}")
        if len(problems) > 5:
            print(f"  ... and {len(problems) - 5} more")
    else:
        print("annotation problems: 0")
    return 0 if matches else 1


def _read_domain_list(path: str) -> set[str]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return set(json.loads(text))
    return {line.strip() for line in text.splitlines() if line.strip()}


def cmd_build(args) -> int:
    schemas, dialogs = _load_dataset(args.dataset, args.directory, args.language)
    if args.train_domains:
        train_domains = _read_domain_list(args.train_domains)
    else:
        train_domains = {
            domain for d in dialogs if d.source_split == "train"
            for domain in d.domains
        }
        if not train_domains:
            print("error: no train-split dialogs found; pass --train-domains",
                  file=sys.stderr)
            return 2
    prompt_config = PromptConfig(
        template=TemplateKind(args.template),
        max_context_units=args.max_context_units,
    )
    examples = build_examples(
        dialogs, schemas, train_domains,
        BuildConfig(max_api_results=args.max_api_results),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_examples(out, examples,
                   render=lambda ex: render_prompt(ex.prompt_context,
                                                   prompt_config))
    meta = {
        "dataset": args.dataset,
        "source": str(args.directory),
        "train_domains": sorted(train_domains),
        "template": args.template,
        "max_context_units": args.max_context_units,
        "max_api_results": args.max_api_results,
        "examples": len(examples),
    }
    _meta_path(out).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    by_split = Counter(e.split_tag.value for e in examples)
    n_calls = sum(1 for e in examples if e.target.call is not None)
    print(f"wrote {len(examples)} examples to {out} "
          f"({n_calls} API-call targets, "
          + ", ".join(f"{k}: {v}" for k, v in sorted(by_split.items())) + ")")
    print(f"wrote build manifest to {_meta_path(out)}")
    return 0


def cmd_evaluate(args) -> int:
    examples_path = Path(args.examples)
    examples = read_examples(examples_path)
    meta_path = _meta_path(examples_path)
    build_meta = (json.loads(meta_path.read_text(encoding="utf-8"))
                  if meta_path.exists() else {})
    template = args.template or build_meta.get("template") or "finetune"
    config = EvalConfig(
        fuzzy_threshold=args.fuzzy_threshold,
        concurrency=args.concurrency,
        max_new_units=args.max_new_units,
        include_strict=args.include_strict,
        prompt=PromptConfig(
            template=TemplateKind(template),
            max_context_units=args.max_context_units,
        ),
    )
    http_kwargs = ({"retries": args.retries, "timeout": args.timeout}
                   if args.client.startswith("http") else {})
    client = make_client(args.client, **http_kwargs)
    client.check_ready()
    result = evaluate(examples, client, config, build_meta=build_meta)
    written = generate_report(result, args.out)
    print(render_tables(result.report))
    print("wrote " + ", ".join(str(p) for p in written))
    failures = result.manifest["generation_failures"]
    if failures:
        print(f"warning: {failures} of {len(result.records)} generate calls "
              "failed and scored zero", file=sys.stderr)
    return 0


def cmd_report(args) -> int:
    rows_path = Path(args.run) / ROWS_FILENAME
    report = load_report_rows(rows_path)
    if args.format == "rows":
        sys.stdout.write(rows_path.read_text(encoding="utf-8"))
    else:
        print(render_tables(report))
    return 0


def cmd_make_fixture(args) -> int:
    root = write_fixture(args.dataset, args.out, preset=args.preset,
                         seed=args.seed)
    print(f"wrote {args.preset} {args.dataset} fixture under {root}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todbench",
        description="Corpus compiler and evaluation harness for schema-"
                    "guided task-oriented dialog.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    datasets = ("sgd", "ketod", "bitod")

    p = sub.add_parser("ingest", help="load a raw dataset and check its "
                                      "statistics against the reference")
    p.add_argument("dataset", choices=datasets)
    p.add_argument("directory")
    p.add_argument("--language", default="en",
                   help="bitod dialog language prefix (default en)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="compile a raw dataset into an "
                                     "ExampleSet JSONL file")
    p.add_argument("dataset", choices=datasets)
    p.add_argument("directory")
    p.add_argument("--out", required=True, help="output .jsonl path")
    p.add_argument("--train-domains",
                   help="file listing seen domains (one per line or a JSON "
                        "array); default: services of the train split")
    p.add_argument("--template", choices=("finetune", "baseline"),
                   default="finetune")
    p.add_argument("--max-context-units", type=int, default=1000)
    p.add_argument("--max-api-results", type=int, default=3)
    p.add_argument("--language", default="en")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("evaluate", help="run a generation client over an "
                                        "ExampleSet and write a report")
    p.add_argument("--examples", required=True)
    p.add_argument("--client", required=True,
                   help="golden | scripted:<file> | http:<url>")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--concurrency", type=int, default=8)
    p.add_argument("--fuzzy-threshold", type=float, default=0.9)
    p.add_argument("--max-new-units", type=int, default=120)
    p.add_argument("--max-context-units", type=int, default=1000)
    p.add_argument("--template", choices=("finetune", "baseline"),
                   help="override the template recorded at build time")
    p.add_argument("--include-strict", action="store_true",
                   help="add exact-set parameter metrics to the report")
    p.add_argument("--retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=30.0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render a finished run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--format", choices=("rows", "tables"), default="tables")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("make-fixture", help="write a synthetic raw dataset "
                                            "in a real layout")
    p.add_argument("dataset", choices=datasets)
    p.add_argument("out")
    p.add_argument("--preset", choices=("small", "reference"), default="small")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_make_fixture)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CorpusError, ConfigInvalid, ClientUnreachable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
