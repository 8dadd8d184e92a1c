import json

from cswbench.align import load_external_alignments
from cswbench.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main

FR_CORPUS = [
    ("the house is red .", "la maison est rouge ."),
    ("a house is old .", "une maison est vieille ."),
    ("the book is blue .", "le livre est bleu ."),
    ("a book is old .", "un livre est vieux ."),
    ("the dog is red .", "le chien est rouge ."),
    ("a dog is blue .", "un chien est bleu ."),
    ("the tree is old .", "le arbre est vieux ."),
    ("a tree is red .", "un arbre est rouge ."),
]

ARABIC_NOUNS = {
    "house": "بيت", "tree": "شجرة", "water": "ماء", "book": "كتاب",
}


def write_jsonl(path, rows):
    path.write_text(
        "\n".join(json.dumps(r, ensure_ascii=False) for r in rows) + "\n",
        encoding="utf-8",
    )


def write_fr_corpus(tmp_path, name="corpus.jsonl", drop_translation_for=()):
    rows = []
    for k, (en, fr) in enumerate(FR_CORPUS):
        translations = {} if f"p{k}" in drop_translation_for else {"fr": fr}
        if not translations:
            translations = {"de": "platzhalter text"}
        rows.append({
            "id": f"p{k}", "matrix_lang": "en", "matrix_text": en,
            "translations": translations,
        })
    path = tmp_path / name
    write_jsonl(path, rows)
    return path


def write_mmlu_fixture(tmp_path):
    """Benchmark + field corpus + hand alignments for an EN->AR mmlu set."""
    nouns = list(ARABIC_NOUNS)
    bench_rows = []
    corpus_rows = []
    align_rows = []
    golds = ["A", "A", "A", "B"]
    for k in range(4):
        noun = nouns[k % len(nouns)]
        question = f"The {noun} is red ."
        bench_rows.append({
            "benchmark_id": "mmlu", "item_id": f"q{k}",
            "fields": {"question": question, "option_a": "yes", "option_b": "no",
                       "option_c": "maybe", "option_d": "never"},
            "gold": golds[k],
        })
        key = f"q{k}/question"
        corpus_rows.append({
            "id": key, "matrix_lang": "en", "matrix_text": question,
            "translations": {"ar": f"{ARABIC_NOUNS[noun]} أحمر ."},
        })
        align_rows.append({"pair_id": key, "embedded_lang": "ar", "links": "1-0"})
    bench_path = tmp_path / "mmlu.jsonl"
    corpus_path = tmp_path / "fields.jsonl"
    align_path = tmp_path / "field_alignments.jsonl"
    write_jsonl(bench_path, bench_rows)
    write_jsonl(corpus_path, corpus_rows)
    write_jsonl(align_path, align_rows)
    return bench_path, corpus_path, align_path


class TestAlignCommand:
    def test_alignments_round_trip(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        out = tmp_path / "out"
        code = main([
            "align", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        sets = load_external_alignments(out / "alignments.jsonl")
        assert len(sets) == len(FR_CORPUS)
        assert (out / "align_manifest.json").exists()

    def test_missing_translation_partial_exit(self, tmp_path):
        corpus = write_fr_corpus(tmp_path, drop_translation_for={"p0"})
        out = tmp_path / "out"
        code = main([
            "align", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--output-dir", str(out),
        ])
        assert code == EXIT_PARTIAL
        skips = json.loads((out / "align_skips.json").read_text())
        assert skips["skipped"][0]["pair_id"] == "p0"


class TestGenerateCommand:
    def test_noun_token_switches(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        out = tmp_path / "out"
        code = main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--method", "noun_token", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "csw.jsonl").read_text().splitlines()]
        assert len(rows) == len(FR_CORPUS)
        first = rows[0]
        assert first["mode"] == "deterministic"
        assert first["csw_text"] == "the maison is red ."
        assert first["points"] == [{"i": 1, "lang": "fr", "repl": "maison"}]

    def test_ratio_deterministic_across_runs(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        outs = []
        for name in ("out1", "out2"):
            out = tmp_path / name
            code = main([
                "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
                "--method", "ratio_token", "--ratio", "0.2", "--seed", "7",
                "--output-dir", str(out),
            ])
            assert code == EXIT_OK
            outs.append((out / "csw.jsonl").read_bytes())
        assert outs[0] == outs[1]

    def test_skip_report_and_partial_exit(self, tmp_path):
        corpus = write_fr_corpus(tmp_path, drop_translation_for={"p2"})
        out = tmp_path / "out"
        code = main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--method", "noun_token", "--output-dir", str(out),
        ])
        assert code == EXIT_PARTIAL
        rows = (out / "csw.jsonl").read_text().splitlines()
        assert len(rows) == len(FR_CORPUS) - 1
        skips = json.loads((out / "generate_skips.json").read_text())
        assert skips["skipped"][0]["pair_id"] == "p2"

    def test_external_alignments_path(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        align_rows = [
            {"pair_id": f"p{k}", "embedded_lang": "fr", "links": "1-1"}
            for k in range(len(FR_CORPUS))
        ]
        align_path = tmp_path / "alignments.jsonl"
        write_jsonl(align_path, align_rows)
        out = tmp_path / "out"
        code = main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--method", "noun_token", "--alignments", str(align_path),
            "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "csw.jsonl").read_text().splitlines()]
        assert rows[0]["csw_text"] == "the maison is red ."


class TestBenchCommand:
    def test_bench_writes_paired_items(self, tmp_path):
        bench_path, corpus_path, align_path = write_mmlu_fixture(tmp_path)
        out = tmp_path / "out"
        code = main([
            "bench", "--benchmark", str(bench_path), "--benchmark-id", "mmlu",
            "--corpus", str(corpus_path), "--alignments", str(align_path),
            "--embedded-langs", "ar", "--method", "noun_token",
            "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "csw_bench.jsonl").read_text(encoding="utf-8").splitlines()]
        assert len(rows) == 4
        for row in rows:
            assert row["original_fields"]["question"].isascii()
            assert not row["switched_fields"]["question"].isascii()
            assert row["original_fields"]["option_a"] == row["switched_fields"]["option_a"]

    def test_extreme_requires_two_langs(self, tmp_path):
        bench_path, corpus_path, align_path = write_mmlu_fixture(tmp_path)
        code = main([
            "bench", "--benchmark", str(bench_path), "--benchmark-id", "mmlu",
            "--corpus", str(corpus_path), "--method", "extreme",
            "--embedded-langs", "ar", "--output-dir", str(tmp_path / "out"),
        ])
        assert code == EXIT_CONFIG


class TestEvalCommand:
    def _bench(self, tmp_path):
        bench_path, corpus_path, align_path = write_mmlu_fixture(tmp_path)
        out = tmp_path / "bench_out"
        assert main([
            "bench", "--benchmark", str(bench_path), "--benchmark-id", "mmlu",
            "--corpus", str(corpus_path), "--alignments", str(align_path),
            "--embedded-langs", "ar", "--method", "noun_token",
            "--output-dir", str(out),
        ]) == EXIT_OK
        return out / "csw_bench.jsonl"

    def test_paired_eval_with_ascii_stub_negative_delta(self, tmp_path):
        paired = self._bench(tmp_path)
        out = tmp_path / "eval_out"
        code = main([
            "eval", "--benchmark", str(paired), "--model", "stub:ascii_only",
            "--embedded-langs", "ar", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        payload = json.loads((out / "accuracy_report.json").read_text(encoding="utf-8"))
        assert payload["report"]["weighted_delta"] < 0

    def test_paired_eval_always_gold_zero_delta(self, tmp_path):
        paired = self._bench(tmp_path)
        out = tmp_path / "eval_out"
        assert main([
            "eval", "--benchmark", str(paired), "--model", "stub:always_gold",
            "--embedded-langs", "ar", "--output-dir", str(out),
        ]) == EXIT_OK
        payload = json.loads((out / "accuracy_report.json").read_text(encoding="utf-8"))
        assert payload["report"]["weighted_accuracy"] == 1.0
        assert payload["report"]["weighted_delta"] == 0.0

    def test_raw_benchmark_fixed_stub_three_of_four(self, tmp_path):
        bench_path, _, _ = write_mmlu_fixture(tmp_path)
        out = tmp_path / "eval_out"
        code = main([
            "eval", "--benchmark", str(bench_path), "--benchmark-id", "mmlu",
            "--model", "stub:fixed:A", "--embedded-langs", "ar",
            "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        payload = json.loads((out / "accuracy_report.json").read_text(encoding="utf-8"))
        assert payload["report"]["per_benchmark"]["mmlu"]["accuracy"] == 0.75

    def test_unknown_model_spec_config_error(self, tmp_path):
        bench_path, _, _ = write_mmlu_fixture(tmp_path)
        code = main([
            "eval", "--benchmark", str(bench_path), "--benchmark-id", "mmlu",
            "--model", "magic", "--output-dir", str(tmp_path / "out"),
        ])
        assert code == EXIT_CONFIG


class TestJudgeCommand:
    def _pairs(self, tmp_path, n=6):
        rows = [
            {"id": str(k), "sentence_a": f"short {k}", "sentence_b": f"much longer sentence {k}"}
            for k in range(n)
        ]
        path = tmp_path / "pairs.jsonl"
        write_jsonl(path, rows)
        return path

    def test_prefer_shorter_stub_all_a(self, tmp_path):
        pairs = self._pairs(tmp_path)
        out = tmp_path / "out"
        code = main([
            "judge", "--pairs-file", str(pairs), "--embedded-langs", "ar",
            "--judge-model", "stub:prefer_shorter", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        payload = json.loads((out / "preference_report.json").read_text())
        assert payload["n_a"] == 6
        assert payload["rate_a"] == 100.0
        assert "config_hash" in payload

    def test_positional_stub_all_ties(self, tmp_path):
        pairs = self._pairs(tmp_path)
        out = tmp_path / "out"
        code = main([
            "judge", "--pairs-file", str(pairs), "--embedded-langs", "ar",
            "--judge-model", "stub:prefer_first", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        payload = json.loads((out / "preference_report.json").read_text())
        assert payload["n_tie"] == 6
        assert payload["rate_a"] is None

    def test_sample_size_too_large_errors(self, tmp_path):
        pairs = self._pairs(tmp_path, n=3)
        code = main([
            "judge", "--pairs-file", str(pairs), "--embedded-langs", "ar",
            "--sample-size", "10", "--output-dir", str(tmp_path / "out"),
        ])
        assert code == EXIT_CONFIG


class TestIftCommand:
    def _long_corpus(self, tmp_path, n_pairs=3, n_words=72):
        rows = []
        align_rows = []
        for k in range(n_pairs):
            words = [f"w{(k + j) % 12}" for j in range(n_words)]
            rows.append({
                "id": f"p{k}", "matrix_lang": "en",
                "matrix_text": " ".join(words),
                "translations": {
                    "fr": " ".join(f"f{(k + j) % 12}" for j in range(n_words)),
                    "ar": " ".join(f"a{(k + j) % 12}" for j in range(n_words)),
                },
            })
            for code in ("fr", "ar"):
                align_rows.append({
                    "pair_id": f"p{k}", "embedded_lang": code,
                    "links": " ".join(f"{j}-{j}" for j in range(n_words)),
                })
        corpus_path = tmp_path / "ted.jsonl"
        align_path = tmp_path / "ted_alignments.jsonl"
        write_jsonl(corpus_path, rows)
        write_jsonl(align_path, align_rows)
        return corpus_path, align_path

    def test_builds_examples_and_sidecar(self, tmp_path):
        corpus_path, align_path = self._long_corpus(tmp_path)
        out = tmp_path / "out"
        code = main([
            "ift", "--corpus", str(corpus_path), "--alignments", str(align_path),
            "--embedded-langs", "fr,ar",
            "--seed", "3", "--output-dir", str(out),
        ])
        assert code == EXIT_OK
        rows = [json.loads(line) for line in (out / "ift.jsonl").read_text(encoding="utf-8").splitlines()]
        assert len(rows) == 6  # 3 pairs x 2 languages
        assert (out / "training_recipe.json").exists()
        assert all(row["template_id"] in (1, 2, 3, 4, 5) for row in rows)
        assert all(row["response"] for row in rows)

    def test_short_pairs_filtered(self, tmp_path):
        corpus_path, align_path = self._long_corpus(tmp_path, n_pairs=2, n_words=70)
        out = tmp_path / "out"
        code = main([
            "ift", "--corpus", str(corpus_path), "--alignments", str(align_path),
            "--embedded-langs", "fr,ar",
            "--output-dir", str(out),
        ])
        # 70-word sentences fail the strict filter; nothing to build.
        assert code == EXIT_OK
        assert (out / "ift.jsonl").read_text() == ""

    def test_deterministic_across_runs(self, tmp_path):
        corpus_path, align_path = self._long_corpus(tmp_path)
        outputs = []
        for name in ("out1", "out2"):
            out = tmp_path / name
            assert main([
                "ift", "--corpus", str(corpus_path), "--alignments", str(align_path),
                "--embedded-langs", "fr,ar",
                "--seed", "11", "--output-dir", str(out),
            ]) == EXIT_OK
            outputs.append((out / "ift.jsonl").read_bytes())
        assert outputs[0] == outputs[1]


class TestConfigHandling:
    def test_config_file_provides_defaults(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        out = tmp_path / "out"
        config = tmp_path / "run.json"
        config.write_text(json.dumps({
            "corpus": str(corpus), "embedded_langs": ["fr"],
            "method": "ratio_token", "seed": 5, "output_dir": str(out),
        }), encoding="utf-8")
        assert main(["generate", "--config", str(config)]) == EXIT_OK
        assert (out / "csw.jsonl").exists()

    def test_cli_overrides_config_file(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        config = tmp_path / "run.yaml"
        config.write_text(
            f"corpus: {corpus}\nembedded_langs: [fr]\nmethod: noun_token\n",
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert main([
            "generate", "--config", str(config), "--method", "ratio_token",
            "--output-dir", str(out),
        ]) == EXIT_OK
        rows = [json.loads(line) for line in (out / "csw.jsonl").read_text().splitlines()]
        assert rows[0]["method"] == "ratio_token"

    def test_unknown_config_key_rejected(self, tmp_path):
        config = tmp_path / "run.json"
        config.write_text(json.dumps({"coprus": "typo.jsonl"}), encoding="utf-8")
        assert main(["generate", "--config", str(config)]) == EXIT_CONFIG

    def test_invalid_ratio_rejected(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        assert main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--method", "ratio_token", "--ratio", "1.7",
            "--output-dir", str(tmp_path / "out"),
        ]) == EXIT_CONFIG

    def test_matrix_in_embedded_rejected(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        assert main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "en",
            "--output-dir", str(tmp_path / "out"),
        ]) == EXIT_CONFIG

    def test_missing_required_path(self, tmp_path):
        assert main(["generate", "--output-dir", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_manifest_carries_hash_and_seed(self, tmp_path):
        corpus = write_fr_corpus(tmp_path)
        out = tmp_path / "out"
        main([
            "generate", "--corpus", str(corpus), "--embedded-langs", "fr",
            "--seed", "21", "--output-dir", str(out),
        ])
        manifest = json.loads((out / "generate_manifest.json").read_text())
        assert manifest["seed"] == 21
        assert len(manifest["config_hash"]) == 64
        assert manifest["command"] == "generate"
