"""Command-line interface.

Every subcommand accepts ``--config FILE`` pointing at a JSON object whose
keys mirror the long flag names (``{"k": 3, "theta": 0.6, ...}``); explicit
flags override config values, which override built-in defaults.  Exit codes:
0 on success, 1 on runtime errors (one-line diagnostic on stderr), 2 on
usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import SentencePair, load_corpus
from .edit_extract import extract_edits
from .errors import Re2Error
from .llm_backend import BackendConfig, DecodingParams, complete, embed
from .pipeline import (
    Re2Config,
    build_sft_data,
    compare_retrievers,
    correct_corpus,
    run_baseline,
    sweep_threshold,
)
from .prompting import load_template_set, render_gee_prompt
from .retriever import IndexConfig, build_index, load_index, query, save_index
from .scorer import detection_metrics, rouge_l, score_corpus, score_sentence
from .segmentation import SegmenterConfig


class _UsageError(Exception):
    pass


class _Options:
    """Flag values overlaid on the optional JSON config manifest."""

    def __init__(self, args: argparse.Namespace):
        self._args = args
        self._manifest = {}
        config_path = getattr(args, "config", None)
        if config_path:
            try:
                self._manifest = json.loads(Path(config_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise Re2Error(f"cannot read config {config_path!r}: {exc}") from None
            if not isinstance(self._manifest, dict):
                raise Re2Error(f"config {config_path!r} must hold a JSON object")

    def get(self, name: str, default=None):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        return self._manifest.get(name, default)

    def require(self, name: str):
        value = self.get(name)
        if value is None:
            raise _UsageError(f"missing required option --{name.replace('_', '-')}")
        return value


def _segmenter(opts: _Options) -> SegmenterConfig:
    return SegmenterConfig(
        mode=opts.get("segmenter", "character"),
        external_command=opts.get("segmenter_cmd"),
        external_timeout=float(opts.get("segmenter_timeout", 10.0)),
    )


def _index_config(opts: _Options) -> IndexConfig:
    return IndexConfig(
        ngram_min=int(opts.get("ngram_min", 2)),
        ngram_max=int(opts.get("ngram_max", 3)),
        ranking=opts.get("ranking", "tfidf_cosine"),
        bm25_k1=float(opts.get("bm25_k1", 1.5)),
        bm25_b=float(opts.get("bm25_b", 0.75)),
        segmenter=_segmenter(opts),
    )


def _backend(opts: _Options, prefix: str = "") -> BackendConfig | None:
    """Backend from the prefix-scoped options; None when none were given."""
    kind = opts.get(prefix + "backend")
    endpoint = opts.get(prefix + "endpoint")
    script = opts.get(prefix + "script")
    if kind is None and endpoint is None and script is None:
        return None
    flag = "--" + prefix.replace("_", "-")
    if kind is None:
        kind = "http" if endpoint else "mock"
    if kind == "mock" and not script:
        raise _UsageError(f"missing required option {flag}script")
    if kind == "http" and not endpoint:
        raise _UsageError(f"missing required option {flag}endpoint")
    return BackendConfig(
        kind=kind,
        endpoint=endpoint,
        model=opts.get(prefix + "model"),
        script_path=script,
        timeout=float(opts.get(prefix + "timeout", 30.0)),
    )


# Stands in for backends a flow never calls (prompt construction only);
# completing against it fails loudly.
_UNUSED_BACKEND = BackendConfig(kind="mock", script_path="<unused>")


def _embedding_backend(opts: _Options) -> BackendConfig | None:
    if opts.get("embed_backend") is None and opts.get("embed_script") is None:
        return None
    kind = opts.get("embed_backend", "mock")
    return BackendConfig(
        kind=kind,
        endpoint=opts.get("embed_endpoint"),
        model=opts.get("embed_model"),
        script_path=opts.get("embed_script"),
        timeout=float(opts.get("embed_timeout", 30.0)),
    )


def _decoding(opts: _Options) -> DecodingParams:
    return DecodingParams(
        sample=bool(opts.get("sample", False)),
        temperature=float(opts.get("temperature", 1.0)),
        beam_size=int(opts.get("beam_size", 8)),
    )


def _re2_config(
    opts: _Options, *, need_correction: bool = True, need_explainer: bool = True
) -> Re2Config:
    backend = _backend(opts)
    explainer = _backend(opts, "explainer_") or backend
    if backend is None:
        if need_correction:
            raise _UsageError("missing required option --script or --backend")
        backend = _UNUSED_BACKEND
    if explainer is None:
        if need_explainer:
            raise _UsageError(
                "missing required option --explainer-script or --explainer-backend"
            )
        explainer = _UNUSED_BACKEND
    return Re2Config(
        backend=backend,
        explainer_backend=explainer,
        k=int(opts.get("k", 3)),
        theta=float(opts.get("theta", 0.6)),
        retriever_field=opts.get("field", "explanation"),
        decoding=_decoding(opts),
        embedding_backend=_embedding_backend(opts),
        index_config=_index_config(opts),
        templates=opts.get("templates", "default"),
    )


def _open_out(opts: _Options):
    path = opts.get("out", "-")
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _emit(opts: _Options, text: str) -> None:
    out, owned = _open_out(opts)
    try:
        out.write(text)
        if not text.endswith("\n"):
            out.write("\n")
    finally:
        if owned:
            out.close()


def _json_line(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _load(opts: _Options, name: str, kind: str = "gec"):
    return load_corpus(opts.require(name), kind=kind, strict=bool(opts.get("strict", False)))


def _read_hyps(opts: _Options, expected: int) -> list[str]:
    if opts.get("hyp_log") is not None:
        lines = Path(opts.get("hyp_log")).read_text(encoding="utf-8").splitlines()
        hyps = [json.loads(line)["correction"] for line in lines if line.strip()]
    else:
        hyps = Path(opts.require("hyp")).read_text(encoding="utf-8").splitlines()
    if len(hyps) != expected:
        raise Re2Error(f"{expected} sources but {len(hyps)} hypotheses")
    return hyps


def _maybe_embedder(opts: _Options):
    backend = _embedding_backend(opts)
    if backend is None:
        return None
    return lambda texts: embed(texts, backend)


def cmd_extract_edits(opts: _Options) -> int:
    cfg = _segmenter(opts)
    if opts.get("source") is not None or opts.get("target") is not None:
        edits = extract_edits(opts.require("source"), opts.require("target"), cfg)
        _emit(opts, _json_line([e.to_triple() for e in edits]))
        return 0
    lines = []
    for raw in Path(opts.require("infile")).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        obj = json.loads(raw)
        edits = extract_edits(obj["source"], obj["target"], cfg)
        lines.append(_json_line([e.to_triple() for e in edits]))
    _emit(opts, "\n".join(lines))
    return 0


def cmd_build_index(opts: _Options) -> int:
    corpus = _load(opts, "infile", kind=opts.get("kind", "gee"))
    index = build_index(
        corpus,
        field_name=opts.get("field", "explanation"),
        config=_index_config(opts),
        embedder=_maybe_embedder(opts),
    )
    save_index(index, opts.require("out"))
    return 0


def cmd_query(opts: _Options) -> int:
    index = load_index(opts.require("index"))
    exclude = [x for x in (opts.get("exclude") or "").split(",") if x]
    result = query(
        index,
        opts.require("text"),
        k=int(opts.get("k", 3)),
        theta=float(opts.get("theta", 0.6)),
        exclude_ids=exclude,
        embedder=_maybe_embedder(opts),
    )
    _emit(opts, _json_line(result.to_dict()))
    return 0


def cmd_explain(opts: _Options) -> int:
    config = _re2_config(opts, need_correction=False)
    template_set = load_template_set(config.templates)
    if opts.get("text") is not None:
        pairs = [("", opts.get("text"))]
    else:
        corpus = _load(opts, "infile")
        pairs = [(rec.id, rec.source) for rec in corpus]
    lines = []
    for rec_id, source in pairs:
        prompt = render_gee_prompt(
            SentencePair(id=rec_id or "input", source=source, targets=[source]),
            "input_only",
            template_set,
        )
        explanation = complete(prompt, config.decoding, config.explainer_backend).strip()
        lines.append(_json_line({"id": rec_id, "source": source, "explanation": explanation}))
    _emit(opts, "\n".join(lines))
    return 0


def cmd_correct(opts: _Options) -> int:
    config = _re2_config(opts)
    dev = _load(opts, "infile")
    train = _load(opts, "corpus", kind="gee")
    index = load_index(opts.require("index"))
    outcomes = correct_corpus(
        [rec.source for rec in dev],
        index,
        train,
        config,
        jobs=int(opts.get("jobs", 1)),
    )
    _emit(opts, "\n".join(_json_line(o.to_dict()) for o in outcomes))
    return 0


def cmd_baseline(opts: _Options) -> int:
    config = _re2_config(opts, need_explainer=False)
    mode = opts.require("mode")
    dev = _load(opts, "infile")
    train = _load(opts, "corpus")
    source_index = load_index(opts.get("index")) if opts.get("index") else None
    seed = int(opts.get("seed", 0))
    lines = []
    for i, rec in enumerate(dev):
        outcome = run_baseline(rec.source, mode, train, source_index, config, seed=seed + i)
        lines.append(_json_line(outcome.to_dict()))
    _emit(opts, "\n".join(lines))
    return 0


def cmd_score(opts: _Options) -> int:
    src = _load(opts, "src")
    hyps = _read_hyps(opts, len(src))
    items = [(rec.source, hyp, rec.targets) for rec, hyp in zip(src, hyps)]
    report = score_corpus(items)
    per_sentence = opts.get("per_sentence")
    if per_sentence:
        with open(per_sentence, "w", encoding="utf-8") as fh:
            fh.write("index\ttp\tfp\tfn\tchosen_reference\n")
            for i, (source, hyp, targets) in enumerate(items):
                s = score_sentence(source, hyp, targets)
                fh.write(f"{i}\t{s.tp}\t{s.fp}\t{s.fn}\t{s.chosen_reference}\n")
    _emit(
        opts,
        json.dumps(
            {
                "tp": report.tp,
                "fp": report.fp,
                "fn": report.fn,
                "precision": report.precision,
                "recall": report.recall,
                "f0.5": report.f_half,
            },
            ensure_ascii=False,
        ),
    )
    return 0


def cmd_rouge(opts: _Options) -> int:
    if opts.get("candidate") is not None or opts.get("reference") is not None:
        p, r, f1 = rouge_l(opts.require("candidate"), opts.require("reference"))
        _emit(opts, json.dumps({"precision": p, "recall": r, "f1": f1}))
        return 0
    cands = Path(opts.require("cand_file")).read_text(encoding="utf-8").splitlines()
    refs = Path(opts.require("ref_file")).read_text(encoding="utf-8").splitlines()
    if len(cands) != len(refs):
        raise Re2Error(f"{len(cands)} candidates but {len(refs)} references")
    if not cands:
        raise Re2Error("no candidate/reference pairs")
    pairs = [rouge_l(c, r) for c, r in zip(cands, refs)]
    n = len(pairs)
    _emit(
        opts,
        json.dumps(
            {
                "pairs": [{"precision": p, "recall": r, "f1": f} for p, r, f in pairs],
                "mean_precision": sum(p for p, _, _ in pairs) / n,
                "mean_recall": sum(r for _, r, _ in pairs) / n,
                "mean_f1": sum(f for _, _, f in pairs) / n,
            },
            ensure_ascii=False,
        ),
    )
    return 0


def cmd_detect(opts: _Options) -> int:
    src = _load(opts, "src")
    hyps = _read_hyps(opts, len(src))
    report = detection_metrics(
        [(rec.source, hyp, rec.targets) for rec, hyp in zip(src, hyps)]
    )
    _emit(opts, json.dumps(report.to_dict(), ensure_ascii=False))
    return 0


def cmd_make_sft_data(opts: _Options) -> int:
    config = _re2_config(opts, need_correction=False, need_explainer=False)
    train = _load(opts, "train", kind="gee")
    index = load_index(opts.require("index"))
    examples = build_sft_data(train, index, config)
    _emit(opts, "\n".join(_json_line(ex.to_dict()) for ex in examples))
    return 0


def cmd_sweep_theta(opts: _Options) -> int:
    config = _re2_config(opts)
    dev = _load(opts, "dev")
    train = _load(opts, "train", kind="gee")
    index = load_index(opts.require("index"))
    raw = opts.require("thetas")
    thetas = [float(x) for x in (raw.split(",") if isinstance(raw, str) else raw)]
    rows = sweep_threshold(dev, thetas, config, index, train)
    _emit(opts, json.dumps(rows, ensure_ascii=False))
    return 0


def cmd_compare_retrievers(opts: _Options) -> int:
    config = _re2_config(opts)
    dev = _load(opts, "dev")
    train = _load(opts, "train", kind="gee")
    raw = opts.require("rankings")
    rankings = [x for x in (raw.split(",") if isinstance(raw, str) else raw) if x]
    rows = compare_retrievers(dev, rankings, config, train)
    _emit(opts, json.dumps(rows, ensure_ascii=False))
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config manifest; flags override its values")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--seed", type=int, help="random seed (default: 0)")
    sub.add_argument("--jobs", type=int, help="max concurrent backend requests (default: 1)")
    sub.add_argument("--strict", action="store_const", const=True,
                     help="reject unknown corpus fields")


def _add_segmenter(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--segmenter", choices=("character", "whitespace", "external"),
                     help="token segmenter (default: character)")
    sub.add_argument("--segmenter-cmd", dest="segmenter_cmd",
                     help="external segmenter command line")
    sub.add_argument("--segmenter-timeout", dest="segmenter_timeout", type=float,
                     help="external segmenter per-line timeout in seconds")


def _add_backend(sub: argparse.ArgumentParser, prefix: str = "", what: str = "correction") -> None:
    flag = "--" + prefix.replace("_", "-") if prefix else "--"
    dest = prefix
    sub.add_argument(f"{flag}backend", dest=f"{dest}backend", choices=("http", "mock"),
                     help=f"{what} backend kind")
    sub.add_argument(f"{flag}endpoint", dest=f"{dest}endpoint",
                     help=f"{what} backend HTTP endpoint")
    sub.add_argument(f"{flag}model", dest=f"{dest}model", help=f"{what} backend model name")
    sub.add_argument(f"{flag}script", dest=f"{dest}script",
                     help=f"{what} mock backend script file")
    sub.add_argument(f"{flag}timeout", dest=f"{dest}timeout", type=float,
                     help=f"{what} backend request timeout in seconds")


def _add_embedding(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--embed-backend", dest="embed_backend", choices=("http", "mock"))
    sub.add_argument("--embed-endpoint", dest="embed_endpoint")
    sub.add_argument("--embed-model", dest="embed_model")
    sub.add_argument("--embed-script", dest="embed_script")


def _add_index_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--ngram-min", dest="ngram_min", type=int)
    sub.add_argument("--ngram-max", dest="ngram_max", type=int)
    sub.add_argument("--ranking", choices=("tfidf_cosine", "bm25", "embedding"))
    sub.add_argument("--bm25-k1", dest="bm25_k1", type=float)
    sub.add_argument("--bm25-b", dest="bm25_b", type=float)


def _add_pipeline_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--k", type=int, help="number of retrieved examples (default: 3)")
    sub.add_argument("--theta", type=float, help="similarity gate threshold (default: 0.6)")
    sub.add_argument("--templates", help="template set name or directory (default: default)")
    sub.add_argument("--field", choices=("explanation", "source"),
                     help="indexed text field (default: explanation)")
    sub.add_argument("--temperature", type=float)
    sub.add_argument("--beam-size", dest="beam_size", type=int)
    sub.add_argument("--sample", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="re2gec",
        description="Explanation-retrieved examples for grammatical error correction.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.set_defaults(handler=handler)
        _add_common(sub)
        return sub

    sub = add("extract-edits", cmd_extract_edits, "extract edit scripts from sentence pairs")
    sub.add_argument("--source", help="source sentence")
    sub.add_argument("--target", help="corrected sentence")
    sub.add_argument("--in", dest="infile", help="JSON-lines file of {source, target} pairs")
    _add_segmenter(sub)

    sub = add("build-index", cmd_build_index, "build a similarity index from a corpus")
    sub.add_argument("--in", dest="infile", help="corpus JSON-lines file")
    sub.add_argument("--kind", choices=("gec", "gee", "detection"), help="corpus kind")
    sub.add_argument("--field", choices=("explanation", "source"),
                     help="indexed text field (default: explanation)")
    _add_index_options(sub)
    _add_segmenter(sub)
    _add_embedding(sub)

    sub = add("query", cmd_query, "query an index")
    sub.add_argument("--index", help="index file")
    sub.add_argument("--text", help="query text")
    sub.add_argument("--k", type=int)
    sub.add_argument("--theta", type=float)
    sub.add_argument("--exclude", help="comma-separated doc ids to exclude")
    _add_embedding(sub)

    sub = add("explain", cmd_explain, "generate error explanations for inputs")
    sub.add_argument("--in", dest="infile", help="corpus JSON-lines file")
    sub.add_argument("--text", help="single input sentence")
    sub.add_argument("--templates")
    _add_backend(sub, "explainer_", "explainer")
    _add_backend(sub)
    sub.add_argument("--temperature", type=float)
    sub.add_argument("--beam-size", dest="beam_size", type=int)
    sub.add_argument("--sample", action="store_const", const=True)

    sub = add("correct", cmd_correct, "correct inputs with explanation-retrieved examples")
    sub.add_argument("--in", dest="infile", help="inputs corpus JSON-lines file")
    sub.add_argument("--corpus", help="reference example corpus (resolves retrieved ids)")
    sub.add_argument("--index", help="explanation index file")
    _add_pipeline_options(sub)
    _add_backend(sub)
    _add_backend(sub, "explainer_", "explainer")
    _add_embedding(sub)

    sub = add("baseline", cmd_baseline, "correct inputs with a baseline example strategy")
    sub.add_argument("--mode", choices=("zero_shot", "random_k", "textsim"))
    sub.add_argument("--in", dest="infile", help="inputs corpus JSON-lines file")
    sub.add_argument("--corpus", help="example corpus")
    sub.add_argument("--index", help="source-text index (textsim mode)")
    _add_pipeline_options(sub)
    _add_backend(sub)
    _add_embedding(sub)

    sub = add("score", cmd_score, "edit-overlap precision/recall/F0.5")
    sub.add_argument("--src", help="source corpus JSON-lines file (with reference targets)")
    sub.add_argument("--hyp", help="hypothesis text file, one sentence per line")
    sub.add_argument("--hyp-log", dest="hyp_log", help="outcome log; corrections are scored")
    sub.add_argument("--per-sentence", dest="per_sentence", help="write per-sentence TSV here")

    sub = add("rouge", cmd_rouge, "character-level ROUGE-L")
    sub.add_argument("--candidate")
    sub.add_argument("--reference")
    sub.add_argument("--cand-file", dest="cand_file")
    sub.add_argument("--ref-file", dest="ref_file")

    sub = add("detect", cmd_detect, "sentence- and position-level detection metrics")
    sub.add_argument("--src", help="source corpus JSON-lines file")
    sub.add_argument("--hyp", help="hypothesis text file, one sentence per line")
    sub.add_argument("--hyp-log", dest="hyp_log")

    sub = add("make-sft-data", cmd_make_sft_data, "build fine-tuning prompt/response pairs")
    sub.add_argument("--train", help="training corpus with explanations")
    sub.add_argument("--index", help="explanation index over the training corpus")
    _add_pipeline_options(sub)

    sub = add("sweep-theta", cmd_sweep_theta, "score the pipeline across gate thresholds")
    sub.add_argument("--dev", help="dev corpus")
    sub.add_argument("--train", help="example corpus backing the index")
    sub.add_argument("--index", help="explanation index file")
    sub.add_argument("--thetas", help="comma-separated thresholds")
    _add_pipeline_options(sub)
    _add_backend(sub)
    _add_backend(sub, "explainer_", "explainer")
    _add_embedding(sub)

    sub = add("compare-retrievers", cmd_compare_retrievers,
              "score the pipeline under different rankings")
    sub.add_argument("--dev", help="dev corpus")
    sub.add_argument("--train", help="example corpus")
    sub.add_argument("--rankings", help="comma-separated rankings to compare")
    _add_index_options(sub)
    _add_segmenter(sub)
    _add_pipeline_options(sub)
    _add_backend(sub)
    _add_backend(sub, "explainer_", "explainer")
    _add_embedding(sub)

    return parser


def dispatch(argv: list[str] | None = None) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        opts = _Options(args)
        return args.handler(opts)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (Re2Error, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
