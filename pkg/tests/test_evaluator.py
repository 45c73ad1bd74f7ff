import json
import math
import random
import sys
from pathlib import Path

import pytest

from agreval.evaluator import (
    build_report,
    decide_pair,
    evaluate_pairs,
    judge_pair,
    render_report,
    write_audit_log,
)
from agreval.pairs import MinimalPair, PHENOMENON_IDS
from agreval.scoring import (
    ExternBackend,
    OracleBackend,
    RandomScoreBackend,
    SentenceScore,
    UniformBackend,
    train_ngram,
)
from agreval.tokenizers import GateResult, gate_counts

STUB = f"{sys.executable} {Path(__file__).parent / 'stub_backend.py'}"

KEEP = gate_counts(4, 4)
DISCARD = gate_counts(4, 5)


def score(mean, tokens=4):
    return SentenceScore.from_sum(tokens, mean * tokens)


class TestJudgePair:
    def test_strictly_lower_is_correct(self):
        assert judge_pair(score(0.9), score(1.4), KEEP) == "correct"

    def test_equal_is_tie(self):
        assert judge_pair(score(1.4), score(1.4), KEEP) == "tie"

    def test_higher_is_incorrect(self):
        assert judge_pair(score(2.0), score(1.4), KEEP) == "incorrect"

    def test_discard_passes_through(self):
        assert judge_pair(None, None, DISCARD) == "discarded"


class TestEvaluate:
    def test_oracle_is_perfect_everywhere(self, corpus):
        pairs, _ = corpus
        backend = OracleBackend(p.grammatical for p in pairs)
        report, decisions = evaluate_pairs(pairs, backend)
        assert len(decisions) == len(pairs)
        for row in report["coarse"] + report["fine"]:
            assert row["accuracy"] == 1.0
            assert row["n_discarded"] == 0

    def test_uniform_ties_everywhere(self, corpus):
        pairs, _ = corpus
        report, decisions = evaluate_pairs(pairs, UniformBackend(171))
        assert all(d.verdict == "tie" for d in decisions)
        for row in report["coarse"]:
            assert row["accuracy"] == 0.0
            assert row["n_tie"] == row["n_total"]

    def test_random_backend_hovers_at_half(self, corpus):
        pairs, _ = corpus
        report, _ = evaluate_pairs(pairs, RandomScoreBackend(0))
        for row in report["coarse"]:
            if row["n_total"] - row["n_discarded"] >= 400:
                assert abs(row["accuracy"] - 0.5) <= 0.05, row["phenomenon"]

    def test_constant_offset_does_not_change_report(self, corpus):
        pairs, _ = corpus
        sample = pairs[:500]

        class Offset:
            name = "offset"
            concurrency_limit = 1

            def __init__(self, base, delta):
                self.base, self.delta = base, delta

            def score_sentence(self, text):
                inner = self.base.score_sentence(text)
                return SentenceScore.from_sum(
                    inner.num_tokens, inner.sum_nll + self.delta * inner.num_tokens
                )

        base = RandomScoreBackend(3)
        plain, _ = evaluate_pairs(sample, Offset(base, 0.0))
        shifted, _ = evaluate_pairs(sample, Offset(base, 7.25))
        for a, b in zip(plain["coarse"], shifted["coarse"]):
            assert {k: a[k] for k in a if k != "accuracy"} == {
                k: b[k] for k in b if k != "accuracy"
            }

    def test_report_is_order_independent(self, corpus):
        pairs, _ = corpus
        sample = list(pairs[:400])
        backend = RandomScoreBackend(9)
        forward, _ = evaluate_pairs(sample, backend)
        random.Random(1).shuffle(sample)
        shuffled, _ = evaluate_pairs(sample, backend)
        assert forward["coarse"] == shuffled["coarse"]
        assert forward["fine"] == shuffled["fine"]

    def test_fine_counts_cross_foot_to_coarse(self, corpus):
        pairs, _ = corpus
        report, _ = evaluate_pairs(pairs, RandomScoreBackend(4))
        fine_by_phen = {}
        for row in report["fine"]:
            fine_by_phen.setdefault(row["phenomenon"], 0)
            fine_by_phen[row["phenomenon"]] += row["n_total"]
        for row in report["coarse"]:
            assert fine_by_phen.get(row["phenomenon"], 0) == row["n_total"]

    def test_mean_and_sum_decisions_agree(self, corpus):
        pairs, _ = corpus
        backend = train_ngram([p.grammatical.split() for p in pairs], order=2, k=0.1)
        _, decisions = evaluate_pairs(pairs, backend)
        for d in decisions:
            by_mean = d.verdict
            g, u = d.score_grammatical, d.score_ungrammatical
            if g.sum_nll < u.sum_nll:
                by_sum = "correct"
            elif g.sum_nll == u.sum_nll:
                by_sum = "tie"
            else:
                by_sum = "incorrect"
            assert by_mean == by_sum, d.pair_id

    def test_empty_input_gives_null_accuracies(self):
        report = build_report([], backend_name="oracle", config={})
        assert len(report["coarse"]) == len(PHENOMENON_IDS)
        for row in report["coarse"]:
            assert row["n_total"] == 0
            assert row["accuracy"] is None

    def test_every_pair_gets_exactly_one_decision(self, corpus):
        pairs, _ = corpus
        _, decisions = evaluate_pairs(pairs[:100], UniformBackend(10))
        assert sorted(d.pair_id for d in decisions) == sorted(p.id for p in pairs[:100])


class TestExternEvaluation:
    def test_backend_gate_discards_unequal_subword_counts(self):
        pairs = [
            MinimalPair("a-0", "simple_sentence", "sg", "Der Autor lacht .", "Der Autor lachen .", 2),
            MinimalPair("a-1", "simple_sentence", "sg", "Das Kind weint .", "Das Kind hofft .", 2),
        ]
        backend = ExternBackend(command=STUB + " --max-word-chars 5")
        try:
            report, decisions = evaluate_pairs(pairs, backend, gate_mode="backend")
        finally:
            backend.close()
        by_id = {d.pair_id: d for d in decisions}
        # "lachen" splits into two stub pieces, "lacht" does not
        assert by_id["a-0"].verdict == "discarded"
        assert by_id["a-1"].verdict in {"correct", "incorrect"}
        row = next(r for r in report["coarse"] if r["phenomenon"] == "simple_sentence")
        assert row["n_discarded"] == 1
        assert row["n_total"] == 2

    def test_concurrent_extern_run_matches_serial(self, corpus):
        pairs, _ = corpus
        sample = pairs[:40]
        serial_backend = ExternBackend(command=STUB)
        try:
            serial, _ = evaluate_pairs(sample, serial_backend, jobs=1)
        finally:
            serial_backend.close()
        concurrent_backend = ExternBackend(command=STUB + " --reverse-batches 2")
        try:
            concurrent, _ = evaluate_pairs(sample, concurrent_backend, jobs=2)
        finally:
            concurrent_backend.close()
        assert serial["coarse"] == concurrent["coarse"]

    def test_mid_run_failure_reports_partial(self, corpus):
        pairs, _ = corpus
        sample = pairs[:30]
        backend = ExternBackend(command=STUB + " --fail-after 9")
        try:
            report, decisions = evaluate_pairs(sample, backend)
        finally:
            backend.close()
        assert report["incomplete"] is True
        assert "incomplete_reason" in report
        assert 0 < len(decisions) < len(sample)


class TestRendering:
    @pytest.fixture()
    def report(self, corpus):
        pairs, _ = corpus
        backend = OracleBackend(p.grammatical for p in pairs)
        report, _ = evaluate_pairs(pairs, backend)
        return report

    def test_markdown_has_14_rows_in_two_sections(self, report):
        text = render_report(report, "markdown")
        assert "**Subject-verb agreement**" in text
        assert "**Reflexive anaphora**" in text
        coarse_section = text.split("## Fine-grained accuracy")[0]
        rows = [
            line
            for line in coarse_section.splitlines()
            if line.startswith("| ") and "**" not in line and "Category" not in line
            and "---" not in line
        ]
        assert len(rows) == 14

    def test_markdown_fine_rows_for_medium_vp(self, report):
        text = render_report(report, "markdown")
        for condition in ("sgsg", "plpl", "sgpl", "plsg"):
            assert f"Medium VP coordination -{condition}" in text

    def test_json_tsv_round_trip_preserves_counts(self, report):
        as_json = json.loads(render_report(report, "json"))
        tsv = render_report(report, "tsv").splitlines()
        header = tsv[0].split("\t")
        rows = [dict(zip(header, line.split("\t"))) for line in tsv[1:]]
        coarse_rows = [r for r in rows if r["condition"] == ""]
        assert len(coarse_rows) == len(as_json["coarse"])
        for row, jrow in zip(coarse_rows, as_json["coarse"]):
            assert int(row["n_total"]) == jrow["n_total"]
            assert int(row["n_correct"]) == jrow["n_correct"]

    def test_audit_log_fields(self, corpus, tmp_path):
        pairs, _ = corpus
        backend = OracleBackend(p.grammatical for p in pairs[:5])
        _, decisions = evaluate_pairs(pairs[:5], backend)
        path = tmp_path / "audit.jsonl"
        write_audit_log(path, decisions)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 5
        record = json.loads(lines[0])
        assert set(record) == {
            "id",
            "verdict",
            "mean_nll_grammatical",
            "mean_nll_ungrammatical",
            "margin",
        }
        assert record["margin"] == pytest.approx(1.0)
