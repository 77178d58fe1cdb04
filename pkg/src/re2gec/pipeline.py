"""End-to-end orchestration.

The main correction flow for one input sentence:

1. explain -- ask the explainer backend for a grammatical-error explanation
   of the bare input (no gold target is available at inference time);
2. retrieve -- query the explanation index with that text and apply the
   theta gate to the best similarity;
3. correct -- render the with-examples prompt from the retrieved records
   when the gate is open (the without-examples prompt otherwise), send it to
   the correction backend, and parse the completion.

Also here: the zero-shot / random-k / text-similarity baselines, supervised
fine-tuning pair construction, the theta ablation sweep, and the ranking
comparison harness.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .corpus import Corpus, SentencePair
from .errors import PipelineError, Re2Error
from .llm_backend import BackendConfig, DecodingParams, complete, embed
from .prompting import (
    TemplateSet,
    load_template_set,
    parse_correction,
    render_gec_prompt,
    render_gee_prompt,
)
from .retriever import (
    ExplanationIndex,
    Hit,
    IndexConfig,
    RetrievalResult,
    build_index,
    query,
)
from .scorer import EvalReport, score_corpus

MODE_WITH = "with_examples"
MODE_WITHOUT = "without_examples"
BASELINE_MODES = ("zero_shot", "random_k", "textsim")


@dataclass(frozen=True)
class Re2Config:
    backend: BackendConfig
    explainer_backend: BackendConfig
    k: int = 3
    theta: float = 0.6
    retriever_field: str = "explanation"
    decoding: DecodingParams = field(default_factory=DecodingParams)
    embedding_backend: BackendConfig | None = None
    index_config: IndexConfig = field(default_factory=IndexConfig)
    templates: str = "default"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not (0.0 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if self.retriever_field not in ("explanation", "source"):
            raise ValueError(f"unknown retriever field {self.retriever_field!r}")


@dataclass(frozen=True)
class CorrectionOutcome:
    input: str
    explanation: str
    hits: RetrievalResult
    prompt: str
    correction: str
    mode_used: str

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "explanation": self.explanation,
            "hits": self.hits.to_dict(),
            "prompt": self.prompt,
            "correction": self.correction,
            "mode_used": self.mode_used,
        }


@dataclass(frozen=True)
class SftExample:
    prompt: str
    response: str
    meta: dict

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "response": self.response, "meta": self.meta}


def _stage(stage: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Re2Error as exc:
        raise PipelineError(stage, str(exc)) from exc


def _embedder(config: Re2Config):
    if config.embedding_backend is None:
        return None
    backend = config.embedding_backend
    return lambda texts: embed(texts, backend)


def generate_explanation(
    input_text: str, config: Re2Config, template_set: TemplateSet
) -> str:
    """Explanation of a bare input sentence, via the explainer backend."""
    pair = SentencePair(id="", source=input_text, targets=[input_text])
    prompt = render_gee_prompt(pair, "input_only", template_set)
    return _stage(
        "explain", complete, prompt, config.decoding, config.explainer_backend
    ).strip()


def _examples_for_hits(
    hits: Sequence[Hit], corpus: Corpus
) -> list[tuple[str, str]]:
    records = [_stage("retrieve", corpus.get, h.doc_id) for h in hits]
    return [(rec.source, rec.targets[0]) for rec in records]


def _correct(
    input_text: str,
    explanation: str,
    result: RetrievalResult,
    corpus: Corpus,
    config: Re2Config,
    template_set: TemplateSet,
    completer: Callable[[str], str],
) -> CorrectionOutcome:
    if result.gate_open and result.hits:
        examples = _examples_for_hits(result.hits, corpus)
        prompt = _stage("prompt", render_gec_prompt, input_text, examples, template_set)
        mode = MODE_WITH
    else:
        prompt = _stage("prompt", render_gec_prompt, input_text, [], template_set)
        mode = MODE_WITHOUT
    correction = _stage("correct", lambda: parse_correction(completer(prompt)))
    return CorrectionOutcome(
        input=input_text,
        explanation=explanation,
        hits=result,
        prompt=prompt,
        correction=correction,
        mode_used=mode,
    )


def run_re2(
    input_text: str,
    index: ExplanationIndex,
    corpus: Corpus,
    config: Re2Config,
    template_set: TemplateSet | None = None,
) -> CorrectionOutcome:
    """Correct one input sentence with explanation-retrieved examples."""
    template_set = template_set or load_template_set(config.templates)
    explanation = generate_explanation(input_text, config, template_set)
    result = _stage(
        "retrieve",
        query,
        index,
        explanation,
        config.k,
        config.theta,
        embedder=_embedder(config),
    )
    completer = lambda prompt: complete(prompt, config.decoding, config.backend)
    return _correct(
        input_text, explanation, result, corpus, config, template_set, completer
    )


def run_baseline(
    input_text: str,
    mode: str,
    corpus: Corpus,
    source_index: ExplanationIndex | None,
    config: Re2Config,
    seed: int = 0,
) -> CorrectionOutcome:
    """Correct one input with a baseline example-selection strategy.

    ``zero_shot`` uses no examples; ``random_k`` draws k corpus records with
    a seeded RNG (the seed alone determines the draw); ``textsim`` retrieves
    by source-text similarity with no theta gate.
    """
    if mode not in BASELINE_MODES:
        raise PipelineError("baseline", f"unknown baseline mode {mode!r}")
    template_set = load_template_set(config.templates)
    if mode == "zero_shot":
        result = RetrievalResult(hits=(), gate_open=False)
    elif mode == "random_k":
        if len(corpus) < config.k:
            raise PipelineError(
                "baseline", f"corpus has {len(corpus)} records, need k={config.k}"
            )
        rng = random.Random(seed)
        chosen = rng.sample(range(len(corpus)), config.k)
        result = RetrievalResult(
            hits=tuple(Hit(corpus.records[i].id, 0.0) for i in chosen),
            gate_open=True,
        )
    else:
        if source_index is None:
            raise PipelineError("baseline", "textsim requires a source-text index")
        result = _stage(
            "retrieve",
            query,
            source_index,
            input_text,
            config.k,
            0.0,
            embedder=_embedder(config),
        )
    completer = lambda prompt: complete(prompt, config.decoding, config.backend)
    return _correct(input_text, "", result, corpus, config, template_set, completer)


def correct_corpus(
    inputs: Sequence[str],
    index: ExplanationIndex,
    corpus: Corpus,
    config: Re2Config,
    jobs: int = 1,
) -> list[CorrectionOutcome]:
    """Run the correction flow over many inputs, preserving input order."""
    template_set = load_template_set(config.templates)
    if jobs <= 1 or len(inputs) <= 1:
        return [run_re2(text, index, corpus, config, template_set) for text in inputs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(
            pool.map(lambda t: run_re2(t, index, corpus, config, template_set), inputs)
        )


def build_sft_data(
    train: Corpus, index: ExplanationIndex, config: Re2Config
) -> list[SftExample]:
    """Fine-tuning pairs: per record one with-examples and one without-examples prompt.

    Retrieval queries the record's own explanation, excludes the record
    itself, and is not theta-gated (every with-examples prompt carries the
    nearest other examples available).  The response is always the record's
    first target.
    """
    template_set = load_template_set(config.templates)
    out = []
    for rec in train:
        if not rec.explanation:
            raise PipelineError("sft", f"record {rec.id}: missing explanation")
        result = _stage(
            "sft",
            query,
            index,
            rec.explanation,
            config.k,
            0.0,
            exclude_ids={rec.id},
            embedder=_embedder(config),
        )
        examples = _examples_for_hits(result.hits, train)
        response = rec.targets[0]
        out.append(
            SftExample(
                prompt=render_gec_prompt(rec.source, examples, template_set),
                response=response,
                meta={
                    "id": rec.id,
                    "mode": MODE_WITH,
                    "example_ids": [h.doc_id for h in result.hits],
                },
            )
        )
        out.append(
            SftExample(
                prompt=render_gec_prompt(rec.source, [], template_set),
                response=response,
                meta={"id": rec.id, "mode": MODE_WITHOUT},
            )
        )
    return out


def _gate_open(ranking: str, hits: tuple[Hit, ...], theta: float) -> bool:
    if ranking == "bm25":
        return bool(hits)
    return bool(hits) and hits[0].score >= theta


def _score_items(
    records: Sequence[SentencePair], corrections: Sequence[str]
) -> EvalReport:
    return score_corpus(
        [
            (rec.source, correction, rec.targets)
            for rec, correction in zip(records, corrections)
        ]
    )


def sweep_threshold(
    dev: Corpus,
    thetas: Sequence[float],
    config: Re2Config,
    index: ExplanationIndex,
    train: Corpus,
) -> list[dict]:
    """Score the pipeline at several gate thresholds.

    Explanations and retrievals are computed once; each theta only re-decides
    the gate.  Completions are cached per distinct prompt.
    """
    for theta in thetas:
        if not (0.0 <= theta <= 1.0):
            raise ValueError(f"theta must lie in [0, 1], got {theta}")
    template_set = load_template_set(config.templates)
    records = list(dev)
    prepared = []
    for rec in records:
        explanation = generate_explanation(rec.source, config, template_set)
        result = _stage(
            "retrieve",
            query,
            index,
            explanation,
            config.k,
            0.0,
            embedder=_embedder(config),
        )
        prepared.append((rec, explanation, result.hits))

    cache: dict[str, str] = {}

    def completer(prompt: str) -> str:
        if prompt not in cache:
            cache[prompt] = complete(prompt, config.decoding, config.backend)
        return cache[prompt]

    rows = []
    ranking = index.config.ranking
    for theta in thetas:
        corrections = []
        for rec, explanation, hits in prepared:
            gated = RetrievalResult(hits=hits, gate_open=_gate_open(ranking, hits, theta))
            outcome = _correct(
                rec.source, explanation, gated, train, config, template_set, completer
            )
            corrections.append(outcome.correction)
        report = _score_items(records, corrections)
        rows.append(
            {
                "theta": theta,
                "precision": report.precision,
                "recall": report.recall,
                "f_half": report.f_half,
            }
        )
    return rows


def compare_retrievers(
    dev: Corpus,
    rankings: Sequence[str],
    config: Re2Config,
    train: Corpus,
) -> list[dict]:
    """Score the pipeline under different ranking backends over one dev set.

    Builds one index per ranking from the train corpus, reuses the same
    explanations across rankings, and reports correction quality plus mean
    per-query retrieval latency.
    """
    template_set = load_template_set(config.templates)
    records = list(dev)
    explanations = [
        generate_explanation(rec.source, config, template_set) for rec in records
    ]
    cache: dict[str, str] = {}

    def completer(prompt: str) -> str:
        if prompt not in cache:
            cache[prompt] = complete(prompt, config.decoding, config.backend)
        return cache[prompt]

    rows = []
    for ranking in rankings:
        index_config = replace(config.index_config, ranking=ranking)
        embedder = _embedder(config)
        if ranking == "embedding" and embedder is None:
            raise PipelineError(
                "compare", "embedding ranking requires an embedding backend"
            )
        index = _stage(
            "compare",
            build_index,
            train,
            config.retriever_field,
            index_config,
            embedder=embedder,
        )
        corrections = []
        total_seconds = 0.0
        for rec, explanation in zip(records, explanations):
            start = time.perf_counter()
            result = _stage(
                "retrieve", query, index, explanation, config.k, config.theta,
                embedder=embedder,
            )
            total_seconds += time.perf_counter() - start
            gated = RetrievalResult(
                hits=result.hits,
                gate_open=_gate_open(ranking, result.hits, config.theta),
            )
            outcome = _correct(
                rec.source, explanation, gated, train, config, template_set, completer
            )
            corrections.append(outcome.correction)
        report = _score_items(records, corrections)
        rows.append(
            {
                "ranking": ranking,
                "precision": report.precision,
                "recall": report.recall,
                "f_half": report.f_half,
                "mean_query_ms": (total_seconds / len(records) * 1000.0) if records else 0.0,
            }
        )
    return rows
