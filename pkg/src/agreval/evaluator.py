"""Run a scorer backend over minimal pairs and aggregate accuracy tables.

A pair is judged correct when the grammatical member gets the strictly
lower mean negative log-likelihood; exactly equal scores count as a tie
(ties stay in the accuracy denominator).  Pairs whose members tokenize to
different lengths under the active gate are discarded and leave the
denominator.  Results aggregate per phenomenon and per condition label.
"""

from __future__ import annotations

import datetime
import json
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass

from .pairs import CONDITION_ORDER, DISPLAY_NAMES, MinimalPair, PHENOMENON_IDS, SECTIONS
from .scoring import BackendError, SentenceScore
from .tokenizers import GateResult, SubwordVocab, gate_counts, subword_tokenize

VERDICTS = ("correct", "incorrect", "tie", "discarded")


@dataclass(frozen=True)
class PairDecision:
    pair_id: str
    phenomenon: str
    condition: str
    verdict: str
    gate: GateResult
    score_grammatical: SentenceScore | None = None
    score_ungrammatical: SentenceScore | None = None

    @property
    def margin(self) -> float | None:
        if self.score_grammatical is None or self.score_ungrammatical is None:
            return None
        return self.score_ungrammatical.mean_nll - self.score_grammatical.mean_nll


def judge_pair(
    score_grammatical: SentenceScore | None,
    score_ungrammatical: SentenceScore | None,
    gate: GateResult,
) -> str:
    if not gate.keep:
        return "discarded"
    if score_grammatical is None or score_ungrammatical is None:
        raise ValueError("kept pairs need both scores")
    if score_grammatical.mean_nll < score_ungrammatical.mean_nll:
        return "correct"
    if score_grammatical.mean_nll == score_ungrammatical.mean_nll:
        return "tie"
    return "incorrect"


@dataclass(frozen=True)
class CategoryResult:
    phenomenon: str
    condition: str | None
    n_total: int
    n_correct: int
    n_incorrect: int
    n_tie: int
    n_discarded: int

    @property
    def accuracy(self) -> float | None:
        denominator = self.n_total - self.n_discarded
        if denominator == 0:
            return None
        return self.n_correct / denominator

    def to_dict(self) -> dict:
        return {
            "phenomenon": self.phenomenon,
            "condition": self.condition,
            "n_total": self.n_total,
            "n_correct": self.n_correct,
            "n_incorrect": self.n_incorrect,
            "n_tie": self.n_tie,
            "n_discarded": self.n_discarded,
            "accuracy": self.accuracy,
        }


def decide_pair(pair: MinimalPair, backend, gate_mode: str, vocab: SubwordVocab | None) -> PairDecision:
    if gate_mode == "whitespace":
        gate = gate_counts(len(pair.grammatical.split()), len(pair.ungrammatical.split()))
    elif gate_mode == "subword":
        if vocab is None:
            raise ValueError("subword gate needs a vocabulary")
        gate = gate_counts(
            len(subword_tokenize(pair.grammatical, vocab)),
            len(subword_tokenize(pair.ungrammatical, vocab)),
        )
    elif gate_mode == "backend":
        gate = None  # decided from the scorer's reported token counts below
    else:
        raise ValueError(f"unknown gate mode {gate_mode!r}")

    if gate is not None and not gate.keep:
        return PairDecision(pair.id, pair.phenomenon, pair.condition, "discarded", gate)

    score_g = backend.score_sentence(pair.grammatical)
    score_u = backend.score_sentence(pair.ungrammatical)
    if gate is None:
        gate = gate_counts(score_g.num_tokens, score_u.num_tokens)
    verdict = judge_pair(score_g, score_u, gate)
    return PairDecision(pair.id, pair.phenomenon, pair.condition, verdict, gate, score_g, score_u)


def evaluate_pairs(
    pairs: list[MinimalPair],
    backend,
    gate_mode: str = "whitespace",
    vocab: SubwordVocab | None = None,
    jobs: int = 1,
    config: dict | None = None,
) -> tuple[dict, list[PairDecision]]:
    """Score every pair and fold the decisions into an evaluation report."""
    decisions: list[PairDecision] = []
    incomplete_reason = None
    workers = max(1, min(jobs, getattr(backend, "concurrency_limit", 1)))
    if workers == 1:
        try:
            for pair in pairs:
                decisions.append(decide_pair(pair, backend, gate_mode, vocab))
        except BackendError as exc:
            incomplete_reason = str(exc)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(decide_pair, pair, backend, gate_mode, vocab): pair for pair in pairs
            }
            for future in as_completed(futures):
                try:
                    decisions.append(future.result())
                except BackendError as exc:
                    incomplete_reason = str(exc)
                    for pending in futures:
                        pending.cancel()
                    break
    decisions.sort(key=lambda d: d.pair_id)
    report = build_report(decisions, backend_name=backend.name, config=config or {})
    if incomplete_reason is not None:
        report["incomplete"] = True
        report["incomplete_reason"] = incomplete_reason
    return report, decisions


def build_report(decisions: list[PairDecision], backend_name: str, config: dict) -> dict:
    coarse_counts = {pid: dict.fromkeys(VERDICTS, 0) for pid in PHENOMENON_IDS}
    fine_counts: dict[tuple[str, str], dict] = {}
    for d in decisions:
        coarse_counts[d.phenomenon][d.verdict] += 1
        key = (d.phenomenon, d.condition)
        fine_counts.setdefault(key, dict.fromkeys(VERDICTS, 0))[d.verdict] += 1

    def result(phenomenon, condition, counts) -> CategoryResult:
        return CategoryResult(
            phenomenon,
            condition,
            sum(counts.values()),
            counts["correct"],
            counts["incorrect"],
            counts["tie"],
            counts["discarded"],
        )

    coarse = [result(pid, None, coarse_counts[pid]) for pid in PHENOMENON_IDS]
    fine = [
        result(pid, cond, fine_counts[(pid, cond)])
        for pid in PHENOMENON_IDS
        for cond in sorted(
            (c for p, c in fine_counts if p == pid),
            key=lambda c: (
                CONDITION_ORDER.index(c) if c in CONDITION_ORDER else len(CONDITION_ORDER),
                c,
            ),
        )
    ]
    return {
        "backend": backend_name,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "config": config,
        "incomplete": False,
        "coarse": [r.to_dict() for r in coarse],
        "fine": [r.to_dict() for r in fine],
    }


def write_audit_log(path, decisions: list[PairDecision]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in decisions:
            record = {
                "id": d.pair_id,
                "verdict": d.verdict,
                "mean_nll_grammatical": None
                if d.score_grammatical is None
                else d.score_grammatical.mean_nll,
                "mean_nll_ungrammatical": None
                if d.score_ungrammatical is None
                else d.score_ungrammatical.mean_nll,
                "margin": d.margin,
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


# --- rendering ----------------------------------------------------------------


def render_report(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, ensure_ascii=False, sort_keys=True, indent=2) + "\n"
    if fmt == "tsv":
        return _render_tsv(report)
    if fmt == "markdown":
        return _render_markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _accuracy_cell(row: dict) -> str:
    return "n/a" if row["accuracy"] is None else f"{row['accuracy']:.4f}"


def _render_tsv(report: dict) -> str:
    columns = (
        "phenomenon",
        "condition",
        "n_total",
        "n_correct",
        "n_incorrect",
        "n_tie",
        "n_discarded",
        "accuracy",
    )
    lines = ["\t".join(columns)]
    for row in report["coarse"] + report["fine"]:
        values = [row[c] if row[c] is not None else "" for c in columns[:-1]]
        values.append("" if row["accuracy"] is None else f"{row['accuracy']:.6f}")
        lines.append("\t".join(str(v) for v in values))
    return "\n".join(lines) + "\n"


def _render_markdown(report: dict) -> str:
    lines = [
        f"Backend: {report['backend']}",
        "",
        "## Accuracy by category",
        "",
        "| Category | Accuracy | # pairs |",
        "| --- | --- | --- |",
    ]
    last_section = None
    scored = {row["phenomenon"]: row for row in report["coarse"]}
    for pid in PHENOMENON_IDS:
        row = scored[pid]
        section = SECTIONS[pid]
        if section != last_section:
            lines.append(f"| **{section}** | | |")
            last_section = section
        evaluated = row["n_total"] - row["n_discarded"]
        lines.append(f"| {DISPLAY_NAMES[pid]} | {_accuracy_cell(row)} | {evaluated} |")
    lines += [
        "",
        "## Fine-grained accuracy",
        "",
        "| Category | Accuracy | # pairs |",
        "| --- | --- | --- |",
    ]
    last_section = None
    for row in report["fine"]:
        section = SECTIONS[row["phenomenon"]]
        if section != last_section:
            lines.append(f"| **{section}** | | |")
            last_section = section
        evaluated = row["n_total"] - row["n_discarded"]
        name = f"{DISPLAY_NAMES[row['phenomenon']]} -{row['condition']}"
        lines.append(f"| {name} | {_accuracy_cell(row)} | {evaluated} |")
    if report.get("incomplete"):
        lines += ["", f"Incomplete run: {report.get('incomplete_reason', 'backend failure')}"]
    return "\n".join(lines) + "\n"
