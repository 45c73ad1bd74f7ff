"""Command-line workbench: validate grammars, generate pairs, evaluate scorers.

Each pipeline stage is its own subcommand with files as the interchange, so
an expensive external-model evaluation can be re-run without regenerating
the corpus.  Every flag can also be set through an AGREVAL_* environment
variable; flags win on conflict.

Exit codes: 0 success, 1 validation/diagnostic failure, 2 usage error,
3 backend transport failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import evaluator, pairs as pairgen, scoring
from .grammar import GrammarError, parse_grammar, validate_grammar
from .tokenizers import SubwordVocab

#: Corpus-size figures reported by the study this workbench replicates;
#: `stats` prints the deviation for information only.
REFERENCE_SENTENCES = 13002
REFERENCE_MEAN_TOKENS = 6.88
REFERENCE_LEXEMES = 88
REFERENCE_WORD_FORMS = 171

ERROR_PREFIX = "agreval: error:"


def _fail(message: str, code: int) -> None:
    click.echo(f"{ERROR_PREFIX} {message}", err=True)
    sys.exit(code)


@click.group(context_settings={"auto_envvar_prefix": "AGREVAL"})
def main() -> None:
    """Agreement minimal-pair workbench."""


grammar_dir_option = click.option(
    "--grammar-dir",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=None,
    help="Directory with *.cfg grammars, cases.json and manifest.json "
    "(defaults to the shipped corpus).",
)


def _resolve_grammar_dir(grammar_dir: Path | None) -> Path:
    return grammar_dir if grammar_dir is not None else pairgen.default_grammar_dir()


@main.command()
@grammar_dir_option
def validate(grammar_dir):
    """Check every grammar and test case; exit 0 only when all are clean."""
    grammar_dir = _resolve_grammar_dir(grammar_dir)
    try:
        specs = pairgen.load_cases(grammar_dir)
    except (OSError, json.JSONDecodeError, pairgen.PairGenError) as exc:
        _fail(f"cases.json: {exc}", 1)
    failures = 0
    for spec in specs:
        try:
            grammar = parse_grammar(
                (grammar_dir / spec.grammar_file).read_text(encoding="utf-8")
            )
            diagnostics = validate_grammar(grammar)
        except (OSError, GrammarError) as exc:
            click.echo(f"{spec.grammar_file}: {exc}")
            failures += 1
            continue
        if diagnostics:
            failures += 1
            for diag in diagnostics:
                click.echo(f"{spec.grammar_file}: {diag}")
        else:
            click.echo(f"{spec.grammar_file}: ok")
    if failures:
        _fail(f"{failures} grammar(s) failed validation", 1)


@main.command()
@grammar_dir_option
@click.option("--pairs", "pairs_path", type=click.Path(path_type=Path), required=True)
@click.option("--strict", is_flag=True, help="Fail when counts differ from the shipped manifest.")
def generate(grammar_dir, pairs_path, strict):
    """Generate the full pair corpus into a JSONL file with a manifest record."""
    grammar_dir = _resolve_grammar_dir(grammar_dir)
    try:
        all_pairs, manifest = pairgen.generate_corpus(grammar_dir)
    except (GrammarError, pairgen.PairGenError) as exc:
        _fail(str(exc), 1)
    pairgen.write_pairs(pairs_path, all_pairs, manifest)
    click.echo(f"wrote {len(all_pairs)} pairs to {pairs_path}")
    shipped_path = grammar_dir / "manifest.json"
    if shipped_path.exists():
        shipped = pairgen.load_shipped_manifest(grammar_dir)
        mismatches = [
            pid
            for pid, info in shipped["phenomena"].items()
            if manifest["phenomena"].get(pid, {}).get("total") != info["total"]
        ]
        if mismatches:
            message = f"counts differ from shipped manifest for: {', '.join(mismatches)}"
            if strict:
                _fail(message, 1)
            click.echo(message)
        else:
            click.echo("counts match the shipped manifest")


def _build_backend(backend, pairs_list, extern_cmd, extern_addr, ngram_order, ngram_k, seed):
    if backend == "oracle":
        return scoring.OracleBackend(p.grammatical for p in pairs_list)
    if backend == "uniform":
        vocab = {t for p in pairs_list for t in p.grammatical.split()}
        return scoring.UniformBackend(max(1, len(vocab)))
    if backend == "random":
        return scoring.RandomScoreBackend(seed)
    if backend == "ngram":
        corpus = [p.grammatical.split() for p in pairs_list]
        return scoring.train_ngram(corpus, order=ngram_order, k=ngram_k)
    if backend == "extern":
        if not extern_cmd and not extern_addr:
            raise click.UsageError("--backend extern needs --extern-cmd or --extern-addr")
        return scoring.ExternBackend(command=extern_cmd, address=extern_addr)
    raise click.UsageError(f"unknown backend {backend!r}")


@main.command()
@click.option("--pairs", "pairs_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option(
    "--backend",
    type=click.Choice(["oracle", "uniform", "ngram", "random", "extern"]),
    default="oracle",
    show_default=True,
)
@click.option("--extern-cmd", default=None, help="Child-process command for the extern backend.")
@click.option("--extern-addr", default=None, help="host:port of a running extern backend.")
@click.option(
    "--gate",
    type=click.Choice(["whitespace", "subword", "backend"]),
    default="whitespace",
    show_default=True,
)
@click.option("--vocab", type=click.Path(exists=True, path_type=Path), default=None,
              help="Sub-word vocabulary file for --gate subword.")
@click.option("--report", "report_path", type=click.Path(path_type=Path), default=None)
@click.option("--audit", "audit_path", type=click.Path(path_type=Path), default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for --backend random.")
@click.option("--ngram-order", type=click.Choice(["2", "3"]), default="2", show_default=True)
@click.option("--ngram-k", type=float, default=0.1, show_default=True)
@click.option("--strict", is_flag=True, help="Validate the pair file before scoring.")
def evaluate(
    pairs_path,
    backend,
    extern_cmd,
    extern_addr,
    gate,
    vocab,
    report_path,
    audit_path,
    jobs,
    seed,
    ngram_order,
    ngram_k,
    strict,
):
    """Score every pair with the selected backend and write the report."""
    try:
        pair_list, _ = pairgen.read_pairs(pairs_path, strict=strict)
    except pairgen.PairFileError as exc:
        _fail(str(exc), 1)
    if gate == "backend" and backend != "extern":
        raise click.UsageError("--gate backend requires --backend extern")
    subword_vocab = SubwordVocab.from_file(vocab) if vocab else None
    if gate == "subword" and subword_vocab is None:
        raise click.UsageError("--gate subword needs --vocab")
    try:
        scorer = _build_backend(
            backend, pair_list, extern_cmd, extern_addr, int(ngram_order), ngram_k, seed
        )
    except scoring.BackendError as exc:
        _fail(str(exc), 3)
    config = {
        "pairs": str(pairs_path),
        "backend": backend,
        "gate": gate,
        "jobs": jobs,
        "seed": seed,
        "pairs_sha256": _sha256(pairs_path),
    }
    try:
        report, decisions = evaluator.evaluate_pairs(
            pair_list, scorer, gate_mode=gate, vocab=subword_vocab, jobs=jobs, config=config
        )
    finally:
        scorer.close()
    if audit_path:
        evaluator.write_audit_log(audit_path, decisions)
    rendered = evaluator.render_report(report, "json")
    if report_path:
        Path(report_path).write_text(rendered, encoding="utf-8")
        click.echo(f"wrote report to {report_path}")
    else:
        click.echo(rendered, nl=False)
    if report.get("incomplete"):
        _fail(f"backend failed mid-run: {report.get('incomplete_reason')}", 3)


def _sha256(path: Path) -> str:
    import hashlib

    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@main.command()
@click.option("--report", "report_path", type=click.Path(exists=True, path_type=Path), required=True)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(["json", "tsv", "markdown"]),
    default="markdown",
    show_default=True,
)
def report(report_path, fmt):
    """Render a stored evaluation report."""
    data = json.loads(Path(report_path).read_text(encoding="utf-8"))
    click.echo(evaluator.render_report(data, fmt), nl=False)


@main.command()
@grammar_dir_option
def stats(grammar_dir):
    """Corpus statistics, with the reference study's figures for comparison."""
    grammar_dir = _resolve_grammar_dir(grammar_dir)
    try:
        all_pairs, _ = pairgen.generate_corpus(grammar_dir)
    except (GrammarError, pairgen.PairGenError) as exc:
        _fail(str(exc), 1)
    sentences = [p.grammatical for p in all_pairs]
    token_counts = [len(s.split()) for s in sentences]
    mean_tokens = sum(token_counts) / len(token_counts)

    lemmas: set[str] = set()
    forms: set[str] = set()
    for spec in pairgen.load_cases(grammar_dir):
        grammar = pairgen.load_grammar(grammar_dir, spec)
        for entry in grammar.lexicon:
            lemmas.add(entry.lemma)
            forms.update(t for t in entry.terminals if t.isalpha())
        for production in grammar.productions:
            for symbol in production.rhs:
                if symbol.is_terminal and symbol.name.isalpha():
                    forms.add(symbol.name)

    def line(label, value, reference):
        if isinstance(value, float):
            delta = value - reference
            click.echo(f"{label}: {value:.2f} (reference {reference:.2f}, difference {delta:+.2f})")
        else:
            delta = value - reference
            click.echo(f"{label}: {value} (reference {reference}, difference {delta:+d})")

    line("sentences", len(sentences), REFERENCE_SENTENCES)
    line("mean tokens per sentence", mean_tokens, REFERENCE_MEAN_TOKENS)
    line("lexemes", len(lemmas), REFERENCE_LEXEMES)
    line("word forms", len(forms), REFERENCE_WORD_FORMS)


if __name__ == "__main__":
    main()
