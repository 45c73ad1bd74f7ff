"""Acceptance suite: one test per shipped criterion, with stated tolerances.

Each test prints a PASS/FAIL line (run with -s or check captured output), so
the suite doubles as a release checklist.
"""

import math
import time

import numpy as np
import pytest

from agreval.evaluator import evaluate_pairs
from agreval.pairs import (
    PHENOMENON_IDS,
    default_grammar_dir,
    generate_corpus,
    load_shipped_manifest,
    write_pairs,
)
from agreval.scoring import (
    OracleBackend,
    RandomScoreBackend,
    UniformBackend,
    cross_entropy,
    train_ngram,
)

RANDOM_BACKEND_SEED = 0

#: Category sizes fixed by the reference benchmark for the cleanly
#: factorizable phenomena; the shipped grammars must reproduce them exactly.
PINNED_CATEGORY_SIZES = {
    "in_sentential_complement": 2160,
    "across_pp": 2160,
    "across_subj_rel": 1440,
    "across_obj_rel": 945,
    "in_obj_rel": 1575,
    "short_vp_coord": 240,
    "medium_vp_coord": 480,
    "long_vp_coord": 480,
    "simple_modifier": 240,
    "extended_modifier": 480,
}


def criterion(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def test_cross_entropy_matches_naive_softmax_oracle():
    rng = np.random.default_rng(20240601)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        T = int(rng.integers(1, 9))
        V = int(rng.integers(2, 21))
        logits = rng.normal(0.0, 3.0, size=(T, V))
        targets = rng.integers(0, V, size=T)
        got = cross_entropy(logits, targets).mean_nll
        total = 0.0
        for row, t in zip(logits, targets):
            exps = [math.exp(v) for v in row]
            total += -math.log(exps[t] / sum(exps))
        want = total / T
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    elapsed = time.perf_counter() - start
    criterion(
        "cross-entropy equals direct-softmax oracle (100 seeded matrices, rel err < 1e-9, < 1 s)",
        worst < 1e-9 and elapsed < 1.0,
        f"worst rel err {worst:.2e}, {elapsed:.2f} s",
    )


def test_single_locus_property_full_corpus(corpus):
    pairs, _ = corpus
    start = time.perf_counter()
    violations = 0
    for pair in pairs:
        good, bad = pair.grammatical.split(), pair.ungrammatical.split()
        if len(good) != len(bad):
            violations += 1
            continue
        diff = [i for i, (a, b) in enumerate(zip(good, bad)) if a != b]
        if diff != [pair.locus_index]:
            violations += 1
    elapsed = time.perf_counter() - start
    criterion(
        "single-locus property holds for 100% of generated pairs (< 5 s)",
        violations == 0 and elapsed < 5.0,
        f"{len(pairs)} pairs, {violations} violations, {elapsed:.2f} s",
    )


def test_generation_is_byte_deterministic(tmp_path):
    files = []
    for name in ("first.jsonl", "second.jsonl"):
        pairs, manifest = generate_corpus(default_grammar_dir())
        path = tmp_path / name
        write_pairs(path, pairs, manifest)
        files.append(path.read_bytes())
    criterion(
        "two generate runs produce byte-identical pair files and manifests",
        files[0] == files[1],
        f"{len(files[0])} bytes",
    )


def test_manifest_counts_match_shipped_and_pinned_sizes(corpus):
    _, manifest = corpus
    shipped = load_shipped_manifest(default_grammar_dir())
    manifest_ok = manifest["phenomena"] == shipped["phenomena"]
    criterion("generated counts equal the shipped manifest exactly", manifest_ok)
    for phenomenon, expected in PINNED_CATEGORY_SIZES.items():
        actual = manifest["phenomena"][phenomenon]["total"]
        criterion(
            f"category size pinned: {phenomenon} == {expected}",
            actual == expected,
            f"got {actual}",
        )


def test_closed_loop_oracle_uniform_random(corpus):
    pairs, _ = corpus
    oracle_report, _ = evaluate_pairs(pairs, OracleBackend(p.grammatical for p in pairs))
    oracle_ok = all(
        row["accuracy"] == 1.0 for row in oracle_report["coarse"] + oracle_report["fine"]
    )
    criterion("oracle backend scores 1.000 in all coarse and fine rows", oracle_ok)

    uniform_report, uniform_decisions = evaluate_pairs(pairs, UniformBackend(171))
    uniform_ok = (
        sum(row["n_correct"] for row in uniform_report["coarse"]) == 0
        and all(d.verdict == "tie" for d in uniform_decisions)
    )
    criterion("uniform backend yields 0 correct and 100% ties", uniform_ok)

    random_report, _ = evaluate_pairs(pairs, RandomScoreBackend(RANDOM_BACKEND_SEED))
    deviations = {
        row["phenomenon"]: abs(row["accuracy"] - 0.5)
        for row in random_report["coarse"]
        if row["n_total"] - row["n_discarded"] >= 400
    }
    worst = max(deviations.values())
    criterion(
        "seeded random backend stays within 0.5 +/- 0.05 on categories with >= 400 pairs",
        worst <= 0.05,
        f"seed {RANDOM_BACKEND_SEED}, worst deviation {worst:.4f}",
    )


def test_mean_and_sum_nll_decisions_agree(corpus):
    pairs, _ = corpus
    backend = train_ngram([p.grammatical.split() for p in pairs], order=2, k=0.1)
    _, decisions = evaluate_pairs(pairs, backend)
    mismatches = 0
    for d in decisions:
        if d.verdict == "discarded":
            continue
        g, u = d.score_grammatical, d.score_ungrammatical
        by_sum = "correct" if g.sum_nll < u.sum_nll else ("tie" if g.sum_nll == u.sum_nll else "incorrect")
        if by_sum != d.verdict:
            mismatches += 1
    criterion(
        "decisions by mean_nll and sum_nll are identical on all kept pairs",
        mismatches == 0,
        f"{mismatches} mismatches over {len(decisions)} pairs",
    )


def test_bigram_calibration_floor(corpus):
    pairs, _ = corpus
    backend = train_ngram([p.grammatical.split() for p in pairs], order=2, k=0.1)
    report, _ = evaluate_pairs(pairs, backend)
    simple = next(r for r in report["coarse"] if r["phenomenon"] == "simple_sentence")
    total_correct = sum(r["n_correct"] for r in report["coarse"])
    total_evaluated = sum(r["n_total"] - r["n_discarded"] for r in report["coarse"])
    overall = total_correct / total_evaluated
    criterion(
        "bigram backend (k=0.1) beats 0.9 on simple sentences",
        simple["accuracy"] > 0.9,
        f"accuracy {simple['accuracy']:.4f}",
    )
    criterion(
        "bigram backend (k=0.1) beats 0.5 overall",
        overall > 0.5,
        f"accuracy {overall:.4f}",
    )


def test_corpus_statistics_reported(corpus):
    pairs, manifest = corpus
    sentences = [p.grammatical for p in pairs]
    mean_tokens = sum(len(s.split()) for s in sentences) / len(sentences)
    # informational comparison: the reference corpus is not reproducible
    # exactly because its original word lists are external to this project
    print(
        f"[INFO] corpus statistics: {len(sentences)} sentences "
        f"(reference 13002, diff {len(sentences) - 13002:+d}); "
        f"mean tokens {mean_tokens:.2f} (reference 6.88, diff {mean_tokens - 6.88:+.2f})"
    )
    criterion(
        "stats are computable over the shipped corpus",
        len(sentences) == manifest["total_pairs"] and mean_tokens > 0,
        f"{len(sentences)} sentences, {mean_tokens:.2f} mean tokens",
    )


def test_their_fine_grained_structure_cross_foots(corpus):
    """Fine-grained condition counts add up to each category total."""
    _, manifest = corpus
    for pid in PHENOMENON_IDS:
        info = manifest["phenomena"][pid]
        criterion(
            f"condition counts cross-foot for {pid}",
            sum(info["conditions"].values()) == info["total"],
            str(info["conditions"]),
        )
