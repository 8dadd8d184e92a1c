"""Command-line pipeline: align | generate | bench | eval | judge | ift.

Commands communicate through files only. Each writes its artifact plus a
run manifest (config hash, seed, versions); timestamps live in the
manifest so artifacts are byte-identical across reruns of the same config.
Exit codes: 0 success, 2 config error, 3 partial failure with a skip report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from . import __version__
from .align import (
    AlignmentSet,
    TranslationTable,
    align_pair,
    load_external_alignments,
    train_ibm1,
)
from .corpus import (
    BenchmarkItem,
    LanguageCode,
    ParallelPair,
    language,
    load_benchmark,
    load_parallel_corpus,
    tokenize,
)
from .evalbench import (
    AccuracyReport,
    BenchmarkScore,
    GenerationResources,
    ModelRef,
    build_csw_benchmark,
    evaluate,
    summarize,
    with_deltas,
)
from .gateway import HttpChatClient, LlmClient, LlmRequest, StubClient, llm_generate_csw
from .ift import build_ift_dataset, filter_long, write_ift_jsonl, write_training_recipe
from .judging import run_comparison
from .switchgen import Method, ResourceError, generate_instance, instance_to_dict
from .tag import load_external_tags

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3

METHODS = ("noun_token", "ratio_token", "extreme")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    matrix_lang: str = "en"
    embedded_langs: list[str] = field(default_factory=lambda: ["ar"])
    method: str = "noun_token"
    ratio: float = 0.2
    seed: int = 0
    threshold: float = 0.3
    iterations: int = 20
    include_proper: bool = True
    min_words: int = 70
    mitigation: bool = False
    generation_mode: str = "deterministic"
    # paths
    corpus: str | None = None
    benchmark: str | None = None
    benchmark_id: str | None = None
    alignments: str | None = None
    tags: str | None = None
    pairs_file: str | None = None
    baseline_report: str | None = None
    output_dir: str = "out"
    # llm settings
    endpoint: str | None = None
    generator_model: str = "default"
    judge_model: str = "stub:prefer_shorter"
    max_retries: int = 2
    concurrency: int = 4
    temperature: float = 0.0
    max_tokens: int = 1024
    # eval / judge
    model: str = "stub:always_gold"
    sample_size: int | None = None
    config_a_name: str = "A"
    config_b_name: str = "B"

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method: {self.method!r} not in {METHODS}")
        if not 0 < self.ratio <= 1:
            raise ConfigError(f"ratio: {self.ratio} outside (0, 1]")
        try:
            language(self.matrix_lang)
            for code in self.embedded_langs:
                language(code)
        except ValueError as exc:
            raise ConfigError(f"languages: {exc}") from exc
        if not self.embedded_langs:
            raise ConfigError("embedded_langs: at least one embedded language required")
        if self.matrix_lang in self.embedded_langs:
            raise ConfigError("embedded_langs: must not contain the matrix language")
        if self.method == "extreme" and len(self.embedded_langs) < 2:
            raise ConfigError("embedded_langs: extreme switching needs at least 2 languages")
        if self.iterations < 1:
            raise ConfigError(f"iterations: must be >= 1, got {self.iterations}")
        if self.generation_mode not in ("deterministic", "llm"):
            raise ConfigError(f"generation_mode: {self.generation_mode!r}")

    @property
    def embedded_language_objects(self) -> list[LanguageCode]:
        return [language(code) for code in self.embedded_langs]


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
    elif path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(text)
    else:
        raise ConfigError(f"config file {path} must be .json, .yaml, or .yml")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return data


def build_config(file_values: Mapping | None, cli_values: Mapping) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    merged: dict = {}
    for source in (file_values or {}), cli_values:
        for key, value in source.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = value
    if isinstance(merged.get("embedded_langs"), str):
        merged["embedded_langs"] = [
            code.strip() for code in merged["embedded_langs"].split(",") if code.strip()
        ]
    return RunConfig(**merged)


def _config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(cfg: RunConfig, command: str, out_dir: Path) -> None:
    manifest = {
        "command": command,
        "config": asdict(cfg),
        "config_hash": _config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "python": platform.python_version(),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    with open(out_dir / f"{command}_manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, default=str)
        handle.write("\n")


def _write_jsonl(path: Path, rows: Sequence[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _write_skip_report(out_dir: Path, command: str, skipped: Sequence) -> None:
    with open(out_dir / f"{command}_skips.json", "w", encoding="utf-8") as handle:
        json.dump({"skipped": list(skipped)}, handle, indent=2, ensure_ascii=False)
        handle.write("\n")


def _require(cfg: RunConfig, *names: str) -> None:
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"{name}: required for this command")


def _train_tables(
    pairs: Sequence[ParallelPair],
    langs: Sequence[LanguageCode],
    iterations: int,
) -> dict[str, TranslationTable]:
    tables: dict[str, TranslationTable] = {}
    for lang in langs:
        training = [
            (
                tokenize(p.matrix_text, p.matrix_lang),
                tokenize(p.translations[lang.code], lang),
            )
            for p in pairs
            if lang.code in p.translations
        ]
        if training:
            tables[lang.code] = train_ibm1(training, iterations)
    return tables


def _group_alignments(
    sets: Sequence[AlignmentSet],
) -> dict[str, dict[str, AlignmentSet]]:
    grouped: dict[str, dict[str, AlignmentSet]] = {}
    for aset in sets:
        grouped.setdefault(aset.pair_id, {})[aset.embedded_lang.code] = aset
    return grouped


def _build_client(cfg: RunConfig, model_spec: str, out_dir: Path) -> LlmClient:
    if model_spec.startswith("stub:"):
        return _stub_client(model_spec.split(":", 1)[1])
    if not cfg.endpoint:
        raise ConfigError("endpoint: required for non-stub LLM models")
    return HttpChatClient(
        cfg.endpoint,
        max_retries=cfg.max_retries,
        concurrency=cfg.concurrency,
        audit_path=str(out_dir / "llm_audit.jsonl"),
    )


def _stub_client(kind: str) -> StubClient:
    """Offline judge stubs for smoke tests. prefer_shorter tracks content
    (stable under flipping); prefer_first tracks position (always ties)."""

    def _sentences(prompt: str) -> tuple[str, str]:
        a = b = ""
        for line in prompt.splitlines():
            if line.startswith("A: "):
                a = line[3:]
            elif line.startswith("B: "):
                b = line[3:]
        return a, b

    if kind == "prefer_shorter":
        def responder(request: LlmRequest) -> str:
            a, b = _sentences(request.prompt)
            return "A" if len(a) <= len(b) else "B"
    elif kind == "prefer_first":
        def responder(request: LlmRequest) -> str:
            return "A"
    else:
        raise ConfigError(f"judge_model: unknown stub {kind!r}")
    return StubClient(responder)


def cmd_align(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    corpus = load_parallel_corpus(cfg.corpus)
    out_dir = _out_dir(cfg)
    langs = cfg.embedded_language_objects
    tables = _train_tables(corpus, langs, cfg.iterations)
    rows = []
    skipped = []
    for lang in langs:
        table = tables.get(lang.code)
        for pair in corpus:
            if lang.code not in pair.translations or table is None:
                skipped.append({"pair_id": pair.id, "lang": lang.code, "reason": "no translation"})
                continue
            aset = align_pair(
                tokenize(pair.matrix_text, pair.matrix_lang),
                tokenize(pair.translations[lang.code], lang),
                table,
                pair_id=pair.id,
                embedded_lang=lang,
                threshold=cfg.threshold,
            )
            rows.append({
                "pair_id": pair.id,
                "embedded_lang": lang.code,
                "links": " ".join(f"{l.matrix_index}-{l.embedded_index}" for l in aset.links),
            })
    _write_jsonl(out_dir / "alignments.jsonl", rows)
    write_manifest(cfg, "align", out_dir)
    print(f"wrote {len(rows)} alignment sets to {out_dir / 'alignments.jsonl'}")
    if skipped:
        _write_skip_report(out_dir, "align", skipped)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_generate(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    corpus = load_parallel_corpus(cfg.corpus)
    pairs_by_id = {p.id: p for p in corpus}
    out_dir = _out_dir(cfg)
    langs = cfg.embedded_language_objects

    ext_alignments = (
        _group_alignments(load_external_alignments(cfg.alignments, pairs_by_id))
        if cfg.alignments
        else {}
    )
    ext_tags = load_external_tags(cfg.tags, pairs_by_id) if cfg.tags else {}
    tables = _train_tables(corpus, langs, cfg.iterations) if not cfg.alignments else {}

    client = None
    if cfg.generation_mode == "llm":
        client = _build_client(cfg, cfg.generator_model, out_dir)

    # The extreme method mixes all embedded languages in one instance;
    # noun/ratio run the per-language grid, one instance per (pair, lang).
    lang_groups = [langs] if cfg.method == "extreme" else [[lang] for lang in langs]
    rows = []
    skipped = []
    for group in lang_groups:
        for pair in corpus:
            try:
                if client is not None:
                    instance = llm_generate_csw(
                        pair, group[0], client,
                        model=cfg.generator_model,
                        max_retries=cfg.max_retries,
                        temperature=cfg.temperature,
                        max_tokens=cfg.max_tokens,
                    )
                else:
                    instance = generate_instance(
                        pair, group, cfg.method,
                        alignments=ext_alignments.get(pair.id),
                        tables=tables,
                        tags=ext_tags.get(pair.id),
                        ratio=cfg.ratio,
                        seed=cfg.seed,
                        threshold=cfg.threshold,
                        include_proper=cfg.include_proper,
                    )
            except (ResourceError, ValueError) as exc:
                skipped.append({"pair_id": pair.id, "reason": str(exc)})
                continue
            rows.append(instance_to_dict(instance))
    _write_jsonl(out_dir / "csw.jsonl", rows)
    write_manifest(cfg, "generate", out_dir)
    print(f"wrote {len(rows)} instances to {out_dir / 'csw.jsonl'}")
    if skipped:
        _write_skip_report(out_dir, "generate", skipped)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    _require(cfg, "benchmark", "benchmark_id", "corpus")
    if cfg.method != "extreme" and len(cfg.embedded_langs) != 1:
        raise ConfigError(
            f"embedded_langs: bench with {cfg.method} takes exactly one language; "
            "run once per language"
        )
    items = load_benchmark(cfg.benchmark, cfg.benchmark_id)
    field_pairs = {p.id: p for p in load_parallel_corpus(cfg.corpus)}
    out_dir = _out_dir(cfg)
    langs = cfg.embedded_language_objects

    ext_alignments = (
        _group_alignments(load_external_alignments(cfg.alignments, field_pairs))
        if cfg.alignments
        else None
    )
    ext_tags = load_external_tags(cfg.tags, field_pairs) if cfg.tags else None
    tables = (
        _train_tables(list(field_pairs.values()), langs, cfg.iterations)
        if not cfg.alignments
        else None
    )
    resources = GenerationResources(
        field_pairs=field_pairs,
        alignments=ext_alignments,
        tags=ext_tags,
        tables=tables,
        ratio=cfg.ratio,
        seed=cfg.seed,
        threshold=cfg.threshold,
        include_proper=cfg.include_proper,
    )
    bench = build_csw_benchmark(
        items, language(cfg.matrix_lang), langs, cfg.method, resources
    )
    rows = [
        {
            "benchmark_id": original.benchmark_id,
            "item_id": original.item_id,
            "gold": original.gold,
            "original_fields": dict(original.fields),
            "switched_fields": dict(switched.fields),
        }
        for original, switched in bench.items
    ]
    _write_jsonl(out_dir / "csw_bench.jsonl", rows)
    write_manifest(cfg, "bench", out_dir)
    print(f"wrote {len(rows)} switched items to {out_dir / 'csw_bench.jsonl'}")
    if bench.skipped:
        _write_skip_report(
            out_dir, "bench",
            [{"item_id": s.item_id, "reason": s.reason} for s in bench.skipped],
        )
        return EXIT_PARTIAL
    return EXIT_OK


def _load_paired_bench(path: str) -> tuple[list[BenchmarkItem], list[BenchmarkItem]]:
    originals = []
    switched = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            row = json.loads(line)
            originals.append(BenchmarkItem(
                row["benchmark_id"], row["item_id"], row["original_fields"], row["gold"]
            ))
            switched.append(BenchmarkItem(
                row["benchmark_id"], row["item_id"], row["switched_fields"], row["gold"]
            ))
    return originals, switched


class _LlmGenerateAdapter:
    def __init__(self, client: LlmClient, model: str, temperature: float, max_tokens: int):
        self.client = client
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens

    def generate(self, prompt: str) -> str:
        return self.client.complete(
            LlmRequest(self.model, prompt, self.temperature, self.max_tokens)
        ).text


def _resolve_model(cfg: RunConfig, out_dir: Path) -> tuple[ModelRef, object | None]:
    spec = cfg.model
    if spec.startswith("stub:"):
        return ModelRef(spec.split(":", 1)[1], "stub"), None
    if spec.startswith("llm:"):
        name = spec.split(":", 1)[1]
        client = _build_client(cfg, name, out_dir)
        adapter = _LlmGenerateAdapter(client, name, cfg.temperature, cfg.max_tokens)
        return ModelRef(name, "generate"), adapter
    raise ConfigError(f"model: expected 'stub:<rule>' or 'llm:<name>', got {spec!r}")


def _report_from_dict(data: Mapping) -> AccuracyReport:
    return AccuracyReport(
        per_benchmark={
            bid: BenchmarkScore(entry["n"], entry["accuracy"])
            for bid, entry in data["per_benchmark"].items()
        },
        weighted_accuracy=data["weighted_accuracy"],
    )


def cmd_eval(cfg: RunConfig) -> int:
    _require(cfg, "benchmark")
    out_dir = _out_dir(cfg)
    model, adapter = _resolve_model(cfg, out_dir)
    mitigation_lang = (
        cfg.embedded_language_objects[0] if cfg.mitigation else None
    )

    with open(cfg.benchmark, encoding="utf-8") as handle:
        first_line = handle.readline()
    paired = bool(first_line.strip()) and "switched_fields" in json.loads(first_line)

    if paired:
        originals, switched = _load_paired_bench(cfg.benchmark)
        base_records = evaluate(model, originals, adapter, max_retries=cfg.max_retries)
        csw_records = evaluate(
            model, switched, adapter,
            mitigation_lang=mitigation_lang, max_retries=cfg.max_retries,
        )
        report = with_deltas(summarize(csw_records), summarize(base_records))
    else:
        _require(cfg, "benchmark_id")
        items = load_benchmark(cfg.benchmark, cfg.benchmark_id)
        records = evaluate(
            model, items, adapter,
            mitigation_lang=mitigation_lang, max_retries=cfg.max_retries,
        )
        report = summarize(records)
        if cfg.baseline_report:
            with open(cfg.baseline_report, encoding="utf-8") as handle:
                baseline = _report_from_dict(json.load(handle)["report"])
            report = with_deltas(report, baseline)

    payload = {
        "model": model.name,
        "adapter_kind": model.adapter_kind,
        "method": cfg.method,
        "matrix_lang": cfg.matrix_lang,
        "embedded_langs": list(cfg.embedded_langs),
        "seed": cfg.seed,
        "mitigation": cfg.mitigation,
        "report": report.to_dict(),
    }
    with open(out_dir / "accuracy_report.json", "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, ensure_ascii=False)
        handle.write("\n")
    write_manifest(cfg, "eval", out_dir)
    print(f"weighted accuracy {report.weighted_accuracy:.4f}"
          + (f", weighted delta {report.weighted_delta:+.4f}" if report.weighted_delta is not None else ""))
    return EXIT_OK


def cmd_judge(cfg: RunConfig) -> int:
    _require(cfg, "pairs_file")
    out_dir = _out_dir(cfg)
    dataset = []
    with open(cfg.pairs_file, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            row = json.loads(line)
            dataset.append((row["sentence_a"], row["sentence_b"]))
    client = _build_client(cfg, cfg.judge_model, out_dir)
    sample_size = cfg.sample_size if cfg.sample_size is not None else len(dataset)
    model_name = (
        cfg.judge_model.split(":", 1)[1]
        if cfg.judge_model.startswith("stub:")
        else cfg.judge_model
    )
    report = run_comparison(
        dataset,
        cfg.embedded_language_objects[0],
        client,
        sample_size,
        config_a_name=cfg.config_a_name,
        config_b_name=cfg.config_b_name,
        model=model_name,
        max_retries=cfg.max_retries,
    )
    with open(out_dir / "preference_report.json", "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(config_hash=_config_hash(cfg)), handle, indent=2)
        handle.write("\n")
    write_manifest(cfg, "judge", out_dir)
    print(f"preferences: {report.n_a} / {report.n_b} ({report.n_tie} ties)")
    return EXIT_OK


def cmd_ift(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    corpus = load_parallel_corpus(cfg.corpus)
    out_dir = _out_dir(cfg)
    langs = cfg.embedded_language_objects
    long_pairs = filter_long(corpus, cfg.min_words)
    pairs_by_id = {p.id: p for p in long_pairs}

    ext_alignments = (
        _group_alignments(load_external_alignments(cfg.alignments, pairs_by_id))
        if cfg.alignments
        else {}
    )
    ext_tags = load_external_tags(cfg.tags, pairs_by_id) if cfg.tags else {}
    tables = _train_tables(long_pairs, langs, cfg.iterations) if not cfg.alignments else {}

    def generator(pair: ParallelPair, lang: LanguageCode) -> str:
        instance = generate_instance(
            pair, [lang], Method.NOUN_TOKEN,
            alignments=ext_alignments.get(pair.id),
            tables=tables,
            tags=ext_tags.get(pair.id),
            seed=cfg.seed,
            threshold=cfg.threshold,
            include_proper=cfg.include_proper,
        )
        return instance.csw_text

    build = build_ift_dataset(long_pairs, langs, generator, cfg.seed)
    write_ift_jsonl(out_dir / "ift.jsonl", build.examples)
    write_training_recipe(out_dir / "training_recipe.json")
    write_manifest(cfg, "ift", out_dir)
    print(
        f"wrote {len(build.examples)} examples to {out_dir / 'ift.jsonl'} "
        f"({len(long_pairs)} pairs kept by the length filter)"
    )
    if build.skipped:
        _write_skip_report(
            out_dir, "ift",
            [{"pair_id": pid, "lang": code} for pid, code in build.skipped],
        )
        return EXIT_PARTIAL
    return EXIT_OK


COMMANDS = {
    "align": cmd_align,
    "generate": cmd_generate,
    "bench": cmd_bench,
    "eval": cmd_eval,
    "judge": cmd_judge,
    "ift": cmd_ift,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cswbench",
        description="Generate code-switched text and benchmarks, evaluate adapters, and report accuracy deltas.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        cmd.add_argument("--config", help="JSON or YAML file with RunConfig defaults")
        cmd.add_argument("--matrix-lang", dest="matrix_lang")
        cmd.add_argument("--embedded-langs", dest="embedded_langs",
                         help="comma-separated codes, e.g. ar or ar,zh")
        cmd.add_argument("--method", choices=METHODS)
        cmd.add_argument("--ratio", type=float)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--threshold", type=float)
        cmd.add_argument("--iterations", type=int)
        cmd.add_argument("--min-words", dest="min_words", type=int)
        cmd.add_argument("--mitigation", action="store_true")
        cmd.add_argument("--generation-mode", dest="generation_mode",
                         choices=("deterministic", "llm"))
        cmd.add_argument("--corpus")
        cmd.add_argument("--benchmark")
        cmd.add_argument("--benchmark-id", dest="benchmark_id",
                         choices=("belebele", "mmlu", "xnli"))
        cmd.add_argument("--alignments")
        cmd.add_argument("--tags")
        cmd.add_argument("--pairs-file", dest="pairs_file")
        cmd.add_argument("--baseline-report", dest="baseline_report")
        cmd.add_argument("--output-dir", dest="output_dir")
        cmd.add_argument("--endpoint")
        cmd.add_argument("--generator-model", dest="generator_model")
        cmd.add_argument("--judge-model", dest="judge_model")
        cmd.add_argument("--max-retries", dest="max_retries", type=int)
        cmd.add_argument("--concurrency", type=int)
        cmd.add_argument("--model")
        cmd.add_argument("--sample-size", dest="sample_size", type=int)
        cmd.add_argument("--config-a-name", dest="config_a_name")
        cmd.add_argument("--config-b-name", dest="config_b_name")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    namespace = parser.parse_args(argv)
    cli_values = vars(namespace)
    command = cli_values.pop("command")
    config_path = cli_values.pop("config", None)
    try:
        file_values = load_config_file(config_path) if config_path else None
        cfg = build_config(file_values, cli_values)
        cfg.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
