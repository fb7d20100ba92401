"""Command-line entry point.

Subcommands mirror the toolkit's stages: ``preprocess``, ``localize``,
``split``, ``score``, ``train``, and ``scenario``. Exit codes: 0 success,
1 validation/usage error, 2 backend or transport error. Every command that
produces files also writes a small run manifest so the invocation can be
replayed; errors are printed as one-line messages, never stack traces.

The backend endpoint can come from (in rising precedence) a config file,
the LOCMT_BACKEND environment variable, or the ``--backend`` flag.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .backend import BackendConfig
from .corpus import (
    LABELED,
    PARALLEL,
    Corpus,
    LangTag,
    SplitSpec,
    Utterance,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .errors import BackendError, LocmtError, ValidationError
from .evalharness import (
    CROSSDIALECT_HATE,
    LOCALIZED_SENTIMENT,
    NMT_EVAL,
    Scenario,
    run_scenario,
)
from .locrules import BorrowLexicon, localize_corpus, shipped_borrow_lexicon
from .metrics import classification_report, combined_f, corpus_bleu, rouge_recall
from .textprep import apply_pipeline, nmt_tokenize, resolve_pipeline
from .trainctl import ExperimentConfig, run_experiment

log = logging.getLogger(__name__)

BACKEND_ENV_VAR = "LOCMT_BACKEND"

SCENARIO_ALIASES = {
    "nmt": NMT_EVAL,
    "sentiment": LOCALIZED_SENTIMENT,
    "hate": CROSSDIALECT_HATE,
}


def _effective_backend(flag_value: str | None, config_value: str | None = None) -> str | None:
    return flag_value or os.environ.get(BACKEND_ENV_VAR) or config_value


def _write_run_manifest(target: Path, command: str, options: dict) -> None:
    canonical = json.dumps(options, sort_keys=True, ensure_ascii=False)
    doc = {
        "command": command,
        "options": options,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16],
    }
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _cmd_preprocess(args) -> int:
    in_path, out_path = Path(args.infile), Path(args.outfile)
    per_record_lang = args.pipeline == "osb-clean" and args.lang is None

    def pipeline_for(lang: str | None):
        return resolve_pipeline(args.pipeline, lang=args.lang or lang)

    if args.format == "text":
        if per_record_lang:
            raise ValidationError("osb-clean on raw text needs --lang")
        pipeline = pipeline_for(None)
        if not in_path.exists():
            raise ValidationError(f"input file not found: {in_path}")
        lines = in_path.read_text(encoding="utf-8").splitlines()
        cleaned = [apply_pipeline(pipeline, line) for line in lines]
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text("\n".join(cleaned) + "\n", encoding="utf-8")
        kept = len(cleaned)
        pipeline_doc = pipeline.to_json()
    else:
        kind = PARALLEL if args.format == "parallel" else LABELED
        corpus = load_corpus(in_path, kind)
        records = []
        pipeline_doc = None
        for record in corpus.records:
            if kind == PARALLEL:
                src_pipe = pipeline_for(record.source.lang.language)
                tgt_pipe = pipeline_for(record.target.lang.language)
                src_text = apply_pipeline(src_pipe, record.source.text)
                tgt_text = apply_pipeline(tgt_pipe, record.target.text)
                pipeline_doc = pipeline_doc or src_pipe.to_json()
                if not src_text.strip() or not tgt_text.strip():
                    continue
                records.append(
                    type(record)(
                        pair_id=record.pair_id,
                        source=replace(record.source, text=src_text),
                        target=replace(record.target, text=tgt_text),
                    )
                )
            else:
                spec = pipeline_for(record.utterance.lang.language)
                pipeline_doc = pipeline_doc or spec.to_json()
                text = apply_pipeline(spec, record.utterance.text)
                if not text.strip():
                    continue
                records.append(
                    type(record)(
                        utterance=replace(record.utterance, text=text),
                        task=record.task,
                        label=record.label,
                    )
                )
        if not records:
            raise ValidationError("preprocessing emptied the whole corpus")
        out = Corpus(
            name=out_path.stem,
            kind=kind,
            records=tuple(records),
            dropped=corpus.dropped + (len(corpus) - len(records)),
        )
        save_corpus(out, out_path)
        kept = len(records)
    _write_run_manifest(
        out_path.with_suffix(out_path.suffix + ".run.json"),
        "preprocess",
        {
            "pipeline": pipeline_doc,
            "in": str(in_path),
            "out": str(out_path),
            "format": args.format,
            "kept": kept,
        },
    )
    print(f"preprocessed {kept} texts -> {out_path}")
    return 0


def _cmd_localize(args) -> int:
    endpoint = _effective_backend(args.backend)
    if endpoint is None:
        raise ValidationError("no backend given (use --backend or LOCMT_BACKEND)")
    src, tgt = LangTag.parse(args.src), LangTag.parse(args.tgt)
    corpus = load_corpus(args.infile, LABELED)
    if args.lexicon:
        lexicon = BorrowLexicon.load(tgt, *args.lexicon)
    else:
        lexicon = shipped_borrow_lexicon(tgt)
    config = BackendConfig(endpoint=endpoint)
    localized = localize_corpus(
        corpus,
        src,
        tgt,
        config,
        lexicon,
        translate_hashtags=not args.no_hashtag_translate,
        max_failure_rate=args.failure_threshold,
    )
    out_path = Path(args.outfile)
    save_corpus(localized, out_path)
    _write_run_manifest(
        out_path.with_suffix(out_path.suffix + ".run.json"),
        "localize",
        {
            "src": str(src),
            "tgt": str(tgt),
            "backend": endpoint,
            "in": str(args.infile),
            "out": str(out_path),
            "records": len(localized),
            "dropped": localized.dropped,
        },
    )
    print(f"localized {len(localized)} records -> {out_path}")
    return 0


def _parse_ratios(text: str) -> tuple[tuple[str, float], ...]:
    ratios = []
    for part in text.split(","):
        if "=" not in part:
            raise ValidationError(f"bad ratio component {part!r}, expected name=fraction")
        name, frac = part.split("=", 1)
        try:
            ratios.append((name.strip(), float(frac)))
        except ValueError as exc:
            raise ValidationError(f"bad fraction in {part!r}") from exc
    return tuple(ratios)


def _cmd_split(args) -> int:
    corpus = load_corpus(args.infile, args.kind)
    spec = SplitSpec(ratios=_parse_ratios(args.ratios), seed=args.seed, stratified=args.stratified)
    out_dir = Path(args.out_dir)
    sizes = {}
    for name, part in split_corpus(corpus, spec):
        path = out_dir / f"{name}.jsonl"
        save_corpus(part, path)
        sizes[name] = len(part)
    _write_run_manifest(
        out_dir / "split.run.json",
        "split",
        {
            "in": str(args.infile),
            "kind": args.kind,
            "ratios": [[n, f] for n, f in spec.ratios],
            "seed": spec.seed,
            "stratified": spec.stratified,
            "sizes": sizes,
        },
    )
    for name, size in sizes.items():
        print(f"{name}: {size}")
    return 0


def _read_lines(path: str) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"file not found: {path}")
    return p.read_text(encoding="utf-8").splitlines()


def _score_manifest(args) -> dict:
    options = {"task": args.task, "hyp": args.hyp, "ref": args.ref}
    canonical = json.dumps(options, sort_keys=True)
    return {
        "command": "score",
        "options": options,
        "config_hash": hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16],
    }


def _cmd_score(args) -> int:
    hyp_lines = _read_lines(args.hyp)
    ref_lines = _read_lines(args.ref)
    if args.task == "mt":
        hyps = [nmt_tokenize(line) for line in hyp_lines]
        refs = [nmt_tokenize(line) for line in ref_lines]
        bleu = corpus_bleu(hyps, refs)
        rouge = rouge_recall(hyps, refs)
        combined = combined_f(bleu, rouge)
        doc = {
            "task": "mt",
            "pairs": len(hyps),
            "metrics": {
                bleu.name: bleu.value,
                rouge.name: rouge.value,
                combined.name: combined.value,
            },
            "manifest": _score_manifest(args),
        }
        if args.format == "json":
            print(json.dumps(doc, ensure_ascii=False, indent=2))
        else:
            for name, value in doc["metrics"].items():
                print(f"{name:<28} {value:8.2f}")
    else:
        truth = [line.strip() for line in ref_lines if line.strip()]
        predicted = [line.strip() for line in hyp_lines if line.strip()]
        if args.classes:
            classes = tuple(c.strip() for c in args.classes.split(","))
        else:
            classes = tuple(sorted(set(truth) | set(predicted)))
        report = classification_report(truth, predicted, classes)
        doc = {
            "task": "classify",
            "report": report.to_json(),
            "manifest": _score_manifest(args),
        }
        if args.format == "json":
            print(json.dumps(doc, ensure_ascii=False, indent=2))
        else:
            print(f"{'class':<12} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}")
            for cls in classes:
                stats = report.per_class[cls]
                print(
                    f"{cls:<12} {stats.precision:>9.4f} {stats.recall:>9.4f} "
                    f"{stats.f1:>9.4f} {stats.support:>9}"
                )
            print(f"accuracy: {report.accuracy:.4f}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
        _write_run_manifest(
            out.with_suffix(out.suffix + ".run.json"),
            "score",
            {"task": args.task, "hyp": args.hyp, "ref": args.ref},
        )
    return 0


def _cmd_train(args) -> int:
    config = ExperimentConfig.load(args.config)
    endpoint = _effective_backend(args.backend, config.backend.endpoint)
    overrides = {}
    if endpoint != config.backend.endpoint:
        overrides["backend"] = replace(config.backend, endpoint=endpoint)
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["split"] = SplitSpec(
            ratios=config.split.ratios, seed=args.seed, stratified=config.split.stratified
        )
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if overrides:
        config = replace(config, **overrides)
    manifest = run_experiment(config)
    manifest_path = Path(config.output_dir) / "run_manifest.json"
    print(f"status: {manifest.status}")
    if manifest.status == "finished":
        print(f"selected model: {manifest.selected_model_id} (evaluation {manifest.best_eval_index})")
        print(f"manifest: {manifest_path}")
        return 0
    print(f"error: {manifest.error}", file=sys.stderr)
    print(f"manifest: {manifest_path}")
    return 2 if manifest.error_kind == "backend" else 1


def _cmd_scenario(args) -> int:
    if args.action != "run":
        raise ValidationError(f"unknown scenario action {args.action!r}")
    scenario = Scenario.load(args.config)
    expected = SCENARIO_ALIASES[args.kind]
    if scenario.kind != expected:
        raise ValidationError(
            f"config is a {scenario.kind} scenario but --kind {args.kind} expects {expected}"
        )
    overrides = {}
    endpoint = _effective_backend(args.backend, scenario.backend.endpoint)
    if endpoint != scenario.backend.endpoint:
        overrides["backend"] = replace(scenario.backend, endpoint=endpoint)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir is not None:
        overrides["output_dir"] = args.out_dir
    if overrides:
        scenario = replace(scenario, **overrides)
    report = run_scenario(scenario)
    print(f"scenario {report.scenario_kind} complete")
    for name, value in report.metrics.items():
        print(f"  {name:<28} {value:8.2f}")
    for name, class_report in report.class_reports.items():
        print(f"  {name}: accuracy {class_report.accuracy:.4f}")
    print(f"report: {Path(scenario.output_dir) / 'report.json'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="locmt",
        description="Content-localization translation and social-text analytics toolkit",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("preprocess", help="apply a cleaning pipeline to a corpus or text file")
    p.add_argument("--pipeline", required=True, help="preset name (nmt-clean, osb-clean) or JSON file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--lang", default=None, help="language for osb-clean stopwords")
    p.add_argument("--format", choices=("text", "parallel", "labeled"), default="text")

    p = sub.add_parser("localize", help="localize a labeled corpus through a backend")
    p.add_argument("--src", required=True)
    p.add_argument("--tgt", required=True)
    p.add_argument("--backend", default=None, help="URL or mock:<dir>")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--lexicon", action="append", default=[], help="borrowing lexicon TSV (repeatable)")
    p.add_argument("--failure-threshold", type=float, default=0.0)
    p.add_argument("--no-hashtag-translate", action="store_true")

    p = sub.add_parser("split", help="deterministically split a corpus")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--kind", choices=(PARALLEL, LABELED), required=True)
    p.add_argument("--ratios", required=True, help='e.g. "train=0.9,test=0.1"')
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stratified", action="store_true")

    p = sub.add_parser("score", help="score hypotheses against references")
    p.add_argument("--task", choices=("mt", "classify"), required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--classes", default=None, help="comma-separated label order (classify)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", default=None, help="also write the JSON report here")

    p = sub.add_parser("train", help="run a training experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--backend", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("scenario", help="run an end-to-end evaluation scenario")
    p.add_argument("action", choices=("run",))
    p.add_argument("--kind", choices=tuple(SCENARIO_ALIASES), required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--backend", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)

    return parser


_HANDLERS = {
    "preprocess": _cmd_preprocess,
    "localize": _cmd_localize,
    "split": _cmd_split,
    "score": _cmd_score,
    "train": _cmd_train,
    "scenario": _cmd_scenario,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    if not argv:
        parser.print_help()
        return 1
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed its message; normalize usage problems to 1
        return 0 if exc.code == 0 else 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        parser.print_help()
        return 1
    try:
        return _HANDLERS[args.command](args)
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except LocmtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    for stream in (sys.stdout, sys.stderr):
        if hasattr(stream, "reconfigure"):
            try:
                stream.reconfigure(encoding="utf-8")
            except (ValueError, OSError):
                pass
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
