"""Command-line front end.

One subcommand per pipeline stage, so any intermediate artifact can be
produced, inspected, or swapped out from the shell. Options may come
from an INI file (--config, section named after the subcommand);
explicit flags win over config values with a warning on stderr.

Exit codes: 0 success, 1 usage problems, 2 data problems, 3 external
service failures.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass
from pathlib import Path
from types import SimpleNamespace

from analex import analogy, corpus as corpus_mod, llm, metrics, pipeline, quadgen
from analex.analogy import ScoreMethod
from analex.embeddings import load_store
from analex.errors import DataError, ExternalServiceError, UsageError
from analex.retrieval import FieldView, build_bm25, build_dense, query_from_case, retrieve


def note(message: str) -> None:
    print(message, file=sys.stderr)


def emit(key: str, value: object) -> None:
    print(f"{key} = {value}")


class Parser(argparse.ArgumentParser):
    """argparse reports usage problems with exit code 1, not its default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass(frozen=True)
class Opt:
    name: str  # long option name, dashes
    kind: str = "str"  # str | int | float | flag
    default: object = None
    required: bool = False
    choices: tuple[str, ...] | None = None
    help: str = ""


_BOOL_TOKENS = {"1": True, "true": True, "yes": True, "on": True,
                "0": False, "false": False, "no": False, "off": False}


def _convert(opt: Opt, raw: object) -> object:
    try:
        if opt.kind == "int":
            return int(raw)
        if opt.kind == "float":
            return float(raw)
        if opt.kind == "flag":
            if isinstance(raw, bool):
                return raw
            token = str(raw).strip().lower()
            if token not in _BOOL_TOKENS:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_TOKENS[token]
        value = str(raw)
        if opt.choices and value not in opt.choices:
            raise ValueError(f"expected one of {', '.join(opt.choices)}")
        return value
    except ValueError as exc:
        raise UsageError(f"bad value for --{opt.name}: {exc}") from None


def _add_options(parser: argparse.ArgumentParser, opts: tuple[Opt, ...]) -> None:
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="INI file supplying defaults for this subcommand")
    for opt in opts:
        if opt.kind == "flag":
            parser.add_argument(f"--{opt.name}", dest=opt.name.replace("-", "_"),
                                action="store_const", const=True, default=None, help=opt.help)
        else:
            parser.add_argument(f"--{opt.name}", dest=opt.name.replace("-", "_"),
                                default=None, metavar=opt.kind.upper(), help=opt.help)


def _config_section(path: str | None, command: str, opts: tuple[Opt, ...]) -> dict[str, str]:
    if path is None:
        return {}
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    config = configparser.ConfigParser()
    config.read(path, encoding="utf-8")
    if command not in config:
        return {}
    known = {opt.name for opt in opts}
    section = dict(config[command])
    for key in section:
        if key not in known:
            note(f"warning: config key {key!r} is not an option of {command}")
    return {key: value for key, value in section.items() if key in known}


def _resolve(command: str, opts: tuple[Opt, ...], ns: argparse.Namespace) -> SimpleNamespace:
    section = _config_section(ns.config, command, opts)
    values = {}
    for opt in opts:
        dest = opt.name.replace("-", "_")
        cli_raw = getattr(ns, dest)
        cfg_raw = section.get(opt.name)
        if cli_raw is not None:
            if cfg_raw is not None and str(cfg_raw) != str(cli_raw):
                note(f"warning: --{opt.name}={cli_raw} overrides config value {cfg_raw!r}")
            values[dest] = _convert(opt, cli_raw)
        elif cfg_raw is not None:
            values[dest] = _convert(opt, cfg_raw)
        elif opt.required:
            raise UsageError(f"missing required option --{opt.name}")
        else:
            values[dest] = opt.default
    return SimpleNamespace(**values)


# ---------------------------------------------------------------- handlers


def _cmd_convert_sara(ns) -> int:
    corpus = corpus_mod.convert_sara_tree(ns.root)
    corpus_mod.serialize_corpus(corpus, ns.out)
    emit("statutes", len(corpus.statutes))
    emit("cases", len(corpus.cases))
    for split in corpus_mod.SPLIT_NAMES:
        emit(f"split {split}", len(corpus.splits.get(split, ())))
    return 0


def _cmd_validate(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    emit("status", "ok")
    emit("statutes", len(corpus.statutes))
    emit("cases", len(corpus.cases))
    for split in corpus_mod.SPLIT_NAMES:
        emit(f"split {split}", len(corpus.splits.get(split, ())))
    return 0


def _cmd_resplit(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    moved = corpus_mod.resplit_test_to_dev(corpus, ns.n, ns.seed)
    corpus_mod.serialize_corpus(moved, ns.out)
    for split in corpus_mod.SPLIT_NAMES:
        emit(f"split {split}", len(moved.splits.get(split, ())))
    return 0


def _cmd_quadgen(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    dataset = quadgen.generate(corpus, ns.split, exclude_same_statute=bool(ns.exclude_same_statute))
    quadgen.write_dataset(dataset, ns.out)
    if ns.expanded:
        quadgen.write_expanded(dataset, corpus, ns.expanded)
    for key, value in quadgen.stats(dataset).items():
        emit(key, value)
    return 0


def _cmd_score(ns) -> int:
    dataset = quadgen.read_dataset(ns.quads)
    store = load_store(ns.store)
    scores = []
    for quad in dataset.quadruples:
        if ns.method == "offset":
            scores.append(analogy.score_quadruple_offset(store, quad, case_scheme=ns.case_scheme))
        else:
            scores.append(analogy.score_pair_concat(store, quad))
    analogy.write_scores(scores, ns.out)
    emit("scored", len(scores))
    return 0


def _cmd_calibrate(ns) -> int:
    scores = analogy.read_scores(ns.scores)
    dataset = quadgen.read_dataset(ns.quads)
    labels = {}
    for quad in dataset.quadruples:
        if quad.label is None:
            raise DataError(f"quadruple {quad.quad_id} is unlabeled; calibration needs labels")
        labels[quad.quad_id] = quad.label
    joined = []
    for score in scores:
        if score.quad_id not in labels:
            raise DataError(f"score for unknown quad_id {score.quad_id!r}")
        joined.append((score, labels[score.quad_id]))
    model = analogy.calibrate_threshold(joined)
    analogy.save_threshold_model(model, ns.out)
    emit("method", model.method.value)
    emit("threshold", repr(model.threshold))
    emit("dev_accuracy", repr(model.dev_accuracy))
    return 0


def _build_classifier(ns) -> analogy.AnalogyClassifier:
    """Classifier from flags: an external verdict file wins, otherwise a
    threshold model plus store is required."""
    if getattr(ns, "external", None):
        return analogy.import_external_predictions(ns.external)
    if not getattr(ns, "model", None):
        raise UsageError("need --model (with --store) or --external")
    if not getattr(ns, "store", None):
        raise UsageError("--model requires --store")
    model = analogy.load_threshold_model(ns.model)
    store = load_store(ns.store)
    if model.method is ScoreMethod.QUADRUPLE_OFFSET:
        return analogy.OffsetThresholdClassifier(store, model, case_scheme=ns.case_scheme)
    return analogy.PairThresholdClassifier(store, model)


def _cmd_classify(ns) -> int:
    dataset = quadgen.read_dataset(ns.quads)
    classifier = _build_classifier(ns)
    predictions = {}
    scored = []
    for quad in dataset.quadruples:
        verdict = classifier.classify(quad)
        predictions[quad.quad_id] = verdict
        if quad.label is not None:
            scored.append((verdict, quad.label))
    analogy.write_predictions(predictions, ns.out)
    emit("classified", len(predictions))
    if scored:
        report = metrics.accuracy(scored)
        emit("accuracy", repr(report.accuracy))
        if ns.report:
            metrics.save_report(report, ns.report)
    return 0


def _cmd_retrieve(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    view = FieldView.from_token(ns.view)
    pool = pipeline.pool_pairs(corpus, ns.pool_split)
    if ns.backend == "bm25":
        index = build_bm25(pool, corpus, view)
    else:
        if not ns.store:
            raise UsageError("the dense backend requires --store")
        index = build_dense(pool, load_store(ns.store), view)
    hits = retrieve(index, query_from_case(corpus, ns.case), ns.k)
    for rank, (pair, score) in enumerate(hits, start=1):
        print(f"{rank}\t{pair.key}\t{score!r}")
    return 0


def _cmd_entail(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    config = pipeline.PipelineConfig(
        backend=ns.backend, k=ns.k, view=FieldView.from_token(ns.view)
    )
    classifier = _build_classifier(ns)
    store = load_store(ns.store) if ns.store else None
    predictions, report = pipeline.run_all(
        config, corpus, ns.query_split, ns.pool_split, classifier, store
    )
    pipeline.write_prediction_dump(ns.out, predictions)
    emit("cases", report.n)
    emit("correct", report.correct)
    emit("accuracy", repr(report.accuracy))
    if ns.report:
        metrics.save_report(report, ns.report)
    return 0


def _cmd_eval(ns) -> int:
    dump = pipeline.read_prediction_dump(ns.dump)
    pairs = []
    for prediction in dump:
        if prediction.gold is None:
            raise DataError(f"case {prediction.case_id!r} has no gold label to evaluate against")
        pairs.append((prediction.predicted, prediction.gold))
    if ns.sampled:
        report = metrics.sampled_accuracy(pairs, m=ns.m, size=ns.size, seed=ns.seed)
        for i, value in enumerate(report.per_set):
            emit(f"set_{i}_accuracy", repr(value))
        emit("mean", repr(report.mean))
        emit("std", repr(report.std))
    else:
        report = metrics.accuracy(pairs)
        emit("cases", report.n)
        emit("correct", report.correct)
        emit("accuracy", repr(report.accuracy))
    if ns.baseline:
        base = metrics.majority_baseline([gold for _, gold in pairs])
        emit("majority_baseline", repr(base.accuracy))
    if ns.out:
        metrics.save_report(report, ns.out)
    return 0


def _cmd_prompt_gen(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    dataset = quadgen.read_dataset(ns.quads)
    kind = llm.PromptKind.from_token(ns.kind)
    exemplars: tuple[llm.PromptExample, ...] | None = None
    if kind is llm.PromptKind.FEW_SHOT:
        if not ns.exemplar_quads:
            raise UsageError("few-shot prompts need --exemplar-quads")
        source = quadgen.read_dataset(ns.exemplar_quads)
        chosen = source.quadruples
        if ns.max_exemplars is not None:
            chosen = chosen[: ns.max_exemplars]
        built = []
        for quad in chosen:
            if quad.label is None:
                raise DataError(f"exemplar quadruple {quad.quad_id} is unlabeled")
            item = llm.item_from_quad(corpus, quad)
            built.append(
                llm.PromptExample(
                    **{f.name: getattr(item, f.name) for f in item.__dataclass_fields__.values()},
                    answer=quad.label,
                )
            )
        exemplars = tuple(built)
    spec = llm.make_spec(kind, exemplars)
    prompts = []
    for quad in dataset.quadruples:
        prompts.append((quad.quad_id, llm.build_prompt(spec, llm.item_from_quad(corpus, quad))))
    llm.write_prompts(ns.out, prompts)
    emit("prompts", len(prompts))
    return 0


def _cmd_llm_run(ns) -> int:
    config = llm.LlmEndpointConfig(
        url=ns.url,
        model=ns.model,
        adapter=ns.adapter,
        temperature=ns.temperature,
        max_tokens=ns.max_tokens,
        api_key_env=ns.api_key_env,
        timeout=ns.timeout,
        max_retries=ns.retries,
        requests_per_minute=ns.rpm,
    )
    prompts = llm.read_prompts(ns.prompts)
    counts = llm.run_quads(config, prompts, out_path=ns.out, log_path=ns.log)
    for key, value in counts.items():
        emit(key, value)
    return 0


def _cmd_sweep(ns) -> int:
    corpus = corpus_mod.parse_corpus(ns.corpus)
    store = load_store(ns.store) if ns.store else None
    classifier = _build_classifier(ns)
    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict[str, object] = {}
    for backend in ns.backends.split(","):
        for view_token in ns.views.split(","):
            for k_token in ns.ks.split(","):
                k = int(k_token)
                config = pipeline.PipelineConfig(
                    backend=backend, k=k, view=FieldView.from_token(view_token)
                )
                note(f"running backend={backend} view={view_token} k={k}")
                predictions, report = pipeline.run_all(
                    config, corpus, ns.query_split, ns.pool_split, classifier, store
                )
                dump = out_dir / f"dump_{backend}_{view_token}_k{k}.jsonl"
                pipeline.write_prediction_dump(dump, predictions)
                summary[f"accuracy {backend} {view_token} k={k}"] = repr(report.accuracy)
    from analex.kv import write_kv

    write_kv(out_dir / "summary.kv", summary)
    for key, value in summary.items():
        emit(key, value)
    return 0


# ------------------------------------------------------------ registration

_CLASSIFIER_OPTS = (
    Opt("store", help="embedding store file"),
    Opt("model", help="threshold model file"),
    Opt("external", help="external predictions file (quad_id, label)"),
    Opt("case-scheme", default="ch", choices=("h", "ch", "sch"),
        help="case view used for offset scoring"),
)

_COMMANDS: dict[str, tuple[str, tuple[Opt, ...], object]] = {
    "convert-sara": (
        "convert a statute/case/split directory tree into a corpus file",
        (Opt("root", required=True, help="directory holding statutes/, cases/, splits/"),
         Opt("out", required=True, help="corpus file to write")),
        _cmd_convert_sara,
    ),
    "validate": (
        "parse a corpus file and report its shape",
        (Opt("corpus", required=True, help="corpus file"),),
        _cmd_validate,
    ),
    "resplit": (
        "move a seeded sample of test cases into the dev split",
        (Opt("corpus", required=True), Opt("out", required=True),
         Opt("n", kind="int", required=True, help="number of test cases to move"),
         Opt("seed", kind="int", required=True)),
        _cmd_resplit,
    ),
    "quadgen": (
        "expand one split into labeled analogy quadruples",
        (Opt("corpus", required=True), Opt("split", required=True),
         Opt("out", required=True, help="quadruple dataset to write"),
         Opt("exclude-same-statute", kind="flag", default=False,
             help="drop quadruples whose two pairs share a statute"),
         Opt("expanded", help="also write rows with full texts to this file")),
        _cmd_quadgen,
    ),
    "score": (
        "score quadruples against an embedding store",
        (Opt("quads", required=True), Opt("store", required=True),
         Opt("method", default="offset", choices=("offset", "pair")),
         Opt("case-scheme", default="ch", choices=("h", "ch", "sch")),
         Opt("out", required=True)),
        _cmd_score,
    ),
    "calibrate": (
        "fit an accuracy-maximizing decision threshold on labeled scores",
        (Opt("scores", required=True), Opt("quads", required=True, help="labeled quadruples"),
         Opt("out", required=True, help="threshold model file to write")),
        _cmd_calibrate,
    ),
    "classify": (
        "label quadruples with a threshold model or external verdicts",
        (Opt("quads", required=True), Opt("out", required=True),
         Opt("report", help="write an accuracy report here when labels exist"))
        + _CLASSIFIER_OPTS,
        _cmd_classify,
    ),
    "retrieve": (
        "show the nearest pool pairs for one case",
        (Opt("corpus", required=True), Opt("pool-split", default="train"),
         Opt("case", required=True, help="query case id"),
         Opt("backend", default="bm25", choices=("bm25", "dense")),
         Opt("view", default="ch", choices=("h", "ch", "sch")),
         Opt("k", kind="int", default=5), Opt("store")),
        _cmd_retrieve,
    ),
    "entail": (
        "predict entailment for a split by analogy over retrieved neighbors",
        (Opt("corpus", required=True), Opt("query-split", default="test"),
         Opt("pool-split", default="train"),
         Opt("backend", default="bm25", choices=("bm25", "dense")),
         Opt("view", default="ch", choices=("h", "ch", "sch")),
         Opt("k", kind="int", default=5),
         Opt("out", required=True, help="prediction dump to write"),
         Opt("report", help="write an accuracy report here"))
        + _CLASSIFIER_OPTS,
        _cmd_entail,
    ),
    "eval": (
        "score a prediction dump, optionally with sampled subsets",
        (Opt("dump", required=True),
         Opt("sampled", kind="flag", default=False),
         Opt("m", kind="int", default=5), Opt("size", kind="int", default=100),
         Opt("seed", kind="int", default=0),
         Opt("baseline", kind="flag", default=False,
             help="also report the majority-label baseline"),
         Opt("out", help="write the report here")),
        _cmd_eval,
    ),
    "prompt-gen": (
        "render analogy questions as language-model prompts",
        (Opt("corpus", required=True), Opt("quads", required=True),
         Opt("kind", default="zero-shot",
             choices=("zero-shot", "few-shot", "cot", "zero-cot")),
         Opt("exemplar-quads", help="labeled quadruples used as few-shot exemplars"),
         Opt("max-exemplars", kind="int"),
         Opt("out", required=True)),
        _cmd_prompt_gen,
    ),
    "llm-run": (
        "send prompts to a completion endpoint and collect verdicts",
        (Opt("prompts", required=True), Opt("url", required=True),
         Opt("model", required=True),
         Opt("adapter", default="completions", choices=("completions", "openai-chat")),
         Opt("api-key-env", help="environment variable holding the API key"),
         Opt("temperature", kind="float", default=0.0),
         Opt("max-tokens", kind="int", default=512),
         Opt("timeout", kind="float", default=60.0),
         Opt("retries", kind="int", default=3),
         Opt("rpm", kind="float", help="request rate limit per minute"),
         Opt("log", help="append request/response records here"),
         Opt("out", required=True)),
        _cmd_llm_run,
    ),
    "sweep": (
        "run the entailment pipeline over a grid of backends, views, and k",
        (Opt("corpus", required=True), Opt("query-split", default="test"),
         Opt("pool-split", default="train"),
         Opt("backends", default="bm25"), Opt("views", default="h,ch,sch"),
         Opt("ks", default="1,3,5,7"),
         Opt("out-dir", required=True))
        + _CLASSIFIER_OPTS,
        _cmd_sweep,
    ),
}


def build_parser() -> Parser:
    parser = Parser(prog="analex", description="statutory entailment by analogical reasoning")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=Parser)
    for name, (help_text, opts, _) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        _add_options(sub, opts)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            raise UsageError("a subcommand is required")
        _, opts, handler = _COMMANDS[ns.command]
        resolved = _resolve(ns.command, opts, ns)
        return handler(resolved)
    except UsageError as exc:
        note(f"error: {exc}")
        return 1
    except DataError as exc:
        note(f"error: {exc}")
        return 2
    except OSError as exc:
        note(f"error: {exc}")
        return 2
    except ExternalServiceError as exc:
        note(f"error: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
