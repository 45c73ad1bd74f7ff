"""Minimal-pair generation from the shipped grammars.

Each test case binds a grammar to a locus nonterminal, a feature flip, a
condition rule, and optional exclusion rules.  The grammatical member of a
pair is a derivation of the grammar; the ungrammatical member is obtained
by swapping the single locus word form for its feature-flipped counterpart,
so the two sentences differ at exactly one token by construction.

Pair files are UTF-8 JSON lines: a manifest record first (counts, input
checksums, config echo), then one record per pair.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .grammar import (
    CASE_FLIP,
    NUMBER_FLIP,
    Grammar,
    GrammarError,
    Node,
    enumerate_sentences,
    parse_grammar,
    validate_grammar,
)

PAIR_FORMAT_VERSION = 1

#: Phenomenon ids in report order: (id, display name, section).
PHENOMENA: tuple[tuple[str, str, str], ...] = (
    ("simple_sentence", "Simple sentence", "Subject-verb agreement"),
    ("in_sentential_complement", "In a sentential complement", "Subject-verb agreement"),
    ("short_vp_coord", "Short VP coordination", "Subject-verb agreement"),
    ("medium_vp_coord", "Medium VP coordination", "Subject-verb agreement"),
    ("long_vp_coord", "Long VP coordination", "Subject-verb agreement"),
    ("across_pp", "Across a prepositional phrase", "Subject-verb agreement"),
    ("across_subj_rel", "Across a subject relative clause", "Subject-verb agreement"),
    ("across_obj_rel", "Across an object relative clause", "Subject-verb agreement"),
    ("in_obj_rel", "In an object relative clause", "Subject-verb agreement"),
    ("simple_modifier", "With a modifier", "Subject-verb agreement"),
    ("extended_modifier", "With an extended modifier", "Subject-verb agreement"),
    ("pre_field", "Pre-field", "Subject-verb agreement"),
    ("ra_person_number", "Person & number agreement", "Reflexive anaphora"),
    ("ra_case", "Case agreement", "Reflexive anaphora"),
)

PHENOMENON_IDS = tuple(p[0] for p in PHENOMENA)
DISPLAY_NAMES = {p[0]: p[1] for p in PHENOMENA}
SECTIONS = {p[0]: p[2] for p in PHENOMENA}

#: Fixed rendering order for condition labels within a phenomenon.
CONDITION_ORDER = ("sg", "pl", "sgsg", "plpl", "sgpl", "plsg", "simple", "longer", "SentCompl")


class PairGenError(ValueError):
    """A test-case specification does not fit its grammar."""


@dataclass(frozen=True)
class TestCaseSpec:
    __test__ = False  # keep pytest from collecting this as a test class

    phenomenon: str
    grammar_file: str
    locus: str
    flip: str  # number | person | case
    condition: dict
    exclusions: tuple[dict, ...] = ()


@dataclass(frozen=True)
class MinimalPair:
    id: str
    phenomenon: str
    condition: str
    grammatical: str
    ungrammatical: str
    locus_index: int

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "phenomenon": self.phenomenon,
            "condition": self.condition,
            "grammatical": self.grammatical,
            "ungrammatical": self.ungrammatical,
            "locus_index": self.locus_index,
        }

    @classmethod
    def from_record(cls, record: dict) -> "MinimalPair":
        return cls(
            record["id"],
            record["phenomenon"],
            record["condition"],
            record["grammatical"],
            record["ungrammatical"],
            int(record["locus_index"]),
        )


def load_cases(grammar_dir: Path) -> list[TestCaseSpec]:
    data = json.loads((Path(grammar_dir) / "cases.json").read_text(encoding="utf-8"))
    specs = []
    for case in data["cases"]:
        if case["phenomenon"] not in PHENOMENON_IDS:
            raise PairGenError(f"unknown phenomenon {case['phenomenon']!r}")
        specs.append(
            TestCaseSpec(
                case["phenomenon"],
                case["grammar"],
                case["locus"],
                case["flip"],
                case["condition"],
                tuple(case.get("exclusions", ())),
            )
        )
    return specs


def load_grammar(grammar_dir: Path, spec: TestCaseSpec) -> Grammar:
    text = (Path(grammar_dir) / spec.grammar_file).read_text(encoding="utf-8")
    grammar = parse_grammar(text)
    diagnostics = validate_grammar(grammar)
    if diagnostics:
        raise PairGenError(
            f"{spec.grammar_file}: " + "; ".join(str(d) for d in diagnostics)
        )
    return grammar


# --- feature flip ------------------------------------------------------------


def flip_locus(derivation: Node, spec: TestCaseSpec, grammar: Grammar) -> str:
    """Surface form of the locus lemma with the flip feature inverted."""
    leaf = derivation.find_unique(spec.locus)
    entry = leaf.entry
    if entry is None:
        raise PairGenError(f"locus {spec.locus} is not a lexicon category")
    if spec.flip == "number":
        value = entry.features.number
        if value not in NUMBER_FLIP:
            raise PairGenError(f"locus entry {entry.surface!r} has no number to flip")
        counterpart = grammar.find_counterpart(entry, number=NUMBER_FLIP[value])
    elif spec.flip == "person":
        if entry.features.person not in (1, 2):
            raise PairGenError(f"locus entry {entry.surface!r} is not first or second person")
        counterpart = grammar.find_counterpart(entry, person=3)
    elif spec.flip == "case":
        value = entry.features.case
        if value not in CASE_FLIP:
            raise PairGenError(f"locus entry {entry.surface!r} has no accusative/dative case")
        counterpart = grammar.find_counterpart(entry, case=CASE_FLIP[value])
    else:
        raise PairGenError(f"unknown flip kind {spec.flip!r}")
    if counterpart is None:
        raise PairGenError(f"no {spec.flip}-flipped form of {entry.surface!r} in the lexicon")
    if len(entry.terminals) != 1 or len(counterpart.terminals) != 1:
        raise PairGenError(f"locus entries must be single tokens: {entry.surface!r}")
    return counterpart.surface


# --- condition labels ---------------------------------------------------------


def tag_condition(derivation: Node, spec: TestCaseSpec) -> str:
    rule = spec.condition
    kind = rule.get("kind")
    if kind == "number":
        return _node_number(derivation, spec.locus)
    if kind == "number_pair":
        agreement = _node_number(derivation, spec.locus)
        distractor = _find_one_of(derivation, rule["distractor"])
        number = distractor.features.number
        if number is None:
            raise PairGenError(f"distractor {distractor.name} carries no number")
        return agreement + number
    if kind == "marker":
        label_map = rule["map"]
        present = [label for name, label in label_map.items() if derivation.find_all(name)]
        if len(present) != 1:
            raise PairGenError(f"expected exactly one marker of {sorted(label_map)}")
        return present[0]
    raise PairGenError(f"unknown condition kind {kind!r}")


def _node_number(derivation: Node, name: str) -> str:
    node = derivation.find_unique(name)
    number = node.features.number
    if number is None:
        raise PairGenError(f"node {name} carries no number feature")
    return number


def _find_one_of(derivation: Node, names) -> Node:
    hits = [node for name in names for node in derivation.find_all(name)]
    if len(hits) != 1:
        raise PairGenError(f"expected exactly one of {list(names)}, found {len(hits)}")
    return hits[0]


# --- exclusion rules ----------------------------------------------------------

_NOM_ACC_FLIP = {"nom": "acc", "acc": "nom"}


def is_excluded(derivation: Node, spec: TestCaseSpec, grammar: Grammar) -> bool:
    return any(_rule_applies(rule, derivation, grammar) for rule in spec.exclusions)


def _rule_applies(rule: dict, derivation: Node, grammar: Grammar) -> bool:
    if rule.get("kind") != "ambiguous_case_pair":
        raise PairGenError(f"unknown exclusion kind {rule.get('kind')!r}")
    subject = derivation.find_unique(rule["subject"])
    obj = derivation.find_unique(rule["object"])
    return _case_ambiguous(subject, grammar) and _case_ambiguous(obj, grammar)


def _case_ambiguous(np_node: Node, grammar: Grammar) -> bool:
    """True when no word in the phrase changes surface between nom and acc."""
    for leaf in _leaves(np_node):
        entry = leaf.entry
        if entry is None or entry.features.case not in _NOM_ACC_FLIP:
            continue
        counterpart = grammar.find_counterpart(
            entry, case=_NOM_ACC_FLIP[entry.features.case]
        )
        if counterpart is None:
            raise PairGenError(
                f"no nominative/accusative comparison form for {entry.surface!r}"
            )
        if counterpart.surface != entry.surface:
            return False
    return True


def _leaves(node: Node):
    if node.is_leaf:
        yield node
    for child in node.children:
        yield from _leaves(child)


# --- generation ---------------------------------------------------------------


def generate_pairs(spec: TestCaseSpec, grammar: Grammar) -> list[MinimalPair]:
    """One pair per surviving derivation, in enumeration order."""
    pairs = []
    for derivation, tokens in enumerate_sentences(grammar):
        if is_excluded(derivation, spec, grammar):
            continue
        locus_index = derivation.locus_token_index(spec.locus)
        flipped = flip_locus(derivation, spec, grammar)
        if flipped == tokens[locus_index]:
            raise PairGenError(f"flip of {tokens[locus_index]!r} produced the same surface")
        ungrammatical = list(tokens)
        ungrammatical[locus_index] = flipped
        condition = tag_condition(derivation, spec)
        pairs.append(
            MinimalPair(
                id=f"{spec.phenomenon}-{len(pairs):05d}",
                phenomenon=spec.phenomenon,
                condition=condition,
                grammatical=" ".join(tokens),
                ungrammatical=" ".join(ungrammatical),
                locus_index=locus_index,
            )
        )
    return pairs


def generate_corpus(grammar_dir: Path) -> tuple[list[MinimalPair], dict]:
    """Generate all phenomena in report order and build the manifest."""
    grammar_dir = Path(grammar_dir)
    specs = {spec.phenomenon: spec for spec in load_cases(grammar_dir)}
    ordered = [specs[pid] for pid in PHENOMENON_IDS if pid in specs]
    all_pairs: list[MinimalPair] = []
    counts: dict[str, dict] = {}
    for spec in ordered:
        grammar = load_grammar(grammar_dir, spec)
        pairs = generate_pairs(spec, grammar)
        per_condition: dict[str, int] = {}
        for pair in pairs:
            per_condition[pair.condition] = per_condition.get(pair.condition, 0) + 1
        counts[spec.phenomenon] = {
            "total": len(pairs),
            "conditions": dict(sorted(per_condition.items(), key=_condition_sort_key)),
            "generated": len(enumerate_sentences(grammar)),
        }
        all_pairs.extend(pairs)
    from . import __version__

    manifest = {
        "record": "manifest",
        "format_version": PAIR_FORMAT_VERSION,
        "generator": f"agreval {__version__}",
        "total_pairs": len(all_pairs),
        "phenomena": counts,
        "checksums": input_checksums(grammar_dir),
    }
    return all_pairs, manifest


def _condition_sort_key(item):
    label = item[0]
    return (CONDITION_ORDER.index(label) if label in CONDITION_ORDER else len(CONDITION_ORDER), label)


def input_checksums(grammar_dir: Path) -> dict[str, str]:
    grammar_dir = Path(grammar_dir)
    sums = {}
    for path in sorted(grammar_dir.glob("*.cfg")) + [grammar_dir / "cases.json"]:
        sums[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return sums


# --- pair file I/O --------------------------------------------------------------


class PairFileError(ValueError):
    pass


def write_pairs(path: Path, pairs: list[MinimalPair], manifest: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, ensure_ascii=False, sort_keys=True) + "\n")
        for pair in pairs:
            fh.write(json.dumps(pair.to_record(), ensure_ascii=False, sort_keys=True) + "\n")


def read_pairs(path: Path, strict: bool = False) -> tuple[list[MinimalPair], dict]:
    pairs: list[MinimalPair] = []
    manifest: dict | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PairFileError(f"line {lineno}: malformed record: {exc}") from exc
            if lineno == 1:
                if record.get("record") != "manifest":
                    raise PairFileError("line 1: missing manifest record")
                manifest = record
                continue
            try:
                pair = MinimalPair.from_record(record)
            except KeyError as exc:
                raise PairFileError(f"line {lineno}: missing field {exc}") from exc
            if strict:
                _check_pair(pair, lineno)
            pairs.append(pair)
    if manifest is None:
        raise PairFileError("empty pair file")
    if strict:
        _check_counts(pairs, manifest)
    return pairs, manifest


def _check_pair(pair: MinimalPair, lineno: int) -> None:
    good, bad = pair.grammatical.split(), pair.ungrammatical.split()
    if len(good) != len(bad):
        raise PairFileError(f"line {lineno}: pair members have different token counts")
    diff = [i for i, (a, b) in enumerate(zip(good, bad)) if a != b]
    if diff != [pair.locus_index]:
        raise PairFileError(
            f"line {lineno}: members differ at positions {diff}, expected [{pair.locus_index}]"
        )


def _check_counts(pairs: list[MinimalPair], manifest: dict) -> None:
    seen: dict[str, int] = {}
    for pair in pairs:
        seen[pair.phenomenon] = seen.get(pair.phenomenon, 0) + 1
    declared = {pid: info["total"] for pid, info in manifest.get("phenomena", {}).items()}
    if seen != declared:
        raise PairFileError(f"manifest counts {declared} do not match file contents {seen}")


def load_shipped_manifest(grammar_dir: Path) -> dict:
    return json.loads((Path(grammar_dir) / "manifest.json").read_text(encoding="utf-8"))


def default_grammar_dir() -> Path:
    return Path(__file__).parent / "data" / "grammars"
