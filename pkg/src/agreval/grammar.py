"""Feature-annotated finite context-free grammars: parsing, validation, enumeration.

Grammar files are line oriented.  One production per line, alternatives
separated by ``|``; terminals in single quotes; nonterminals are bare
identifiers.  Both sides may carry a feature suffix in square brackets::

    S -> NP V '.'
    NP -> ART N
    V[num=sg,lemma=lachen] -> 'lacht'
    V[num=pl,lemma=lachen] -> 'lachen'
    N -> 'Autoren' | 'Richterinnen'

Recognised features are ``num`` (sg/pl), ``per`` (1/2/3) and ``case``
(nom/acc/dat/gen).  A ``lemma`` key is allowed on lexicon productions
(productions whose right-hand side is all terminals) and links the word
forms of one lexeme; it defaults to the surface string.  ``#`` starts a
comment.  A directive line ``%paired CATEGORY FEATURE`` declares that every
lexicon lemma of CATEGORY must have counterpart forms with FEATURE flipped
(e.g. a plural form for every singular verb).

The start symbol is the left-hand side of the first production.  The
nonterminal dependency graph must be acyclic, so the generated language is
finite and can be enumerated exhaustively.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import cached_property

NUMBER_VALUES = ("sg", "pl")
PERSON_VALUES = (1, 2, 3)
CASE_VALUES = ("nom", "acc", "dat", "gen")


class GrammarError(ValueError):
    """Raised on malformed grammar text or an unusable grammar."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        prefix = ""
        if line is not None:
            prefix = f"line {line}"
            if column is not None:
                prefix += f", column {column}"
            prefix += ": "
        super().__init__(prefix + message)


@dataclass(frozen=True)
class FeatureBundle:
    """Agreement features; ``None`` means unspecified and unifies with anything."""

    number: str | None = None
    person: int | None = None
    case: str | None = None

    def unify(self, other: "FeatureBundle") -> "FeatureBundle | None":
        """Combine two bundles; None signals a clash on a specified feature."""
        merged = {}
        for name in ("number", "person", "case"):
            a, b = getattr(self, name), getattr(other, name)
            if a is not None and b is not None and a != b:
                return None
            merged[name] = a if a is not None else b
        return FeatureBundle(**merged)

    def is_empty(self) -> bool:
        return self.number is None and self.person is None and self.case is None

    def render(self) -> str:
        parts = []
        if self.number is not None:
            parts.append(f"num={self.number}")
        if self.person is not None:
            parts.append(f"per={self.person}")
        if self.case is not None:
            parts.append(f"case={self.case}")
        return ",".join(parts)


EMPTY_FEATURES = FeatureBundle()


@dataclass(frozen=True)
class Symbol:
    """One right-hand-side item: a quoted terminal or a nonterminal reference."""

    kind: str  # "terminal" | "nonterminal"
    name: str
    features: FeatureBundle = EMPTY_FEATURES

    @property
    def is_terminal(self) -> bool:
        return self.kind == "terminal"


@dataclass(frozen=True)
class Production:
    lhs: str
    lhs_features: FeatureBundle
    rhs: tuple[Symbol, ...]
    lemma: str | None = None  # only on lexicon productions
    line: int = field(default=0, compare=False)  # provenance, not content

    @property
    def is_lexical(self) -> bool:
        return all(s.is_terminal for s in self.rhs)


@dataclass(frozen=True)
class LexiconEntry:
    """A lexicon production seen as a word-form entry."""

    lemma: str
    category: str
    features: FeatureBundle
    terminals: tuple[str, ...]

    @property
    def surface(self) -> str:
        return " ".join(self.terminals)

    @property
    def key(self) -> tuple:
        return (self.lemma, self.category, self.features)


@dataclass(frozen=True)
class Grammar:
    start: str
    productions: tuple[Production, ...]
    paired: tuple[tuple[str, str], ...] = ()  # (category, feature) declarations

    def productions_for(self, name: str) -> list[Production]:
        return self._by_lhs.get(name, [])

    @cached_property
    def _by_lhs(self) -> dict[str, list[Production]]:
        index: dict[str, list[Production]] = {}
        for p in self.productions:
            index.setdefault(p.lhs, []).append(p)
        return index

    @cached_property
    def lexicon(self) -> list[LexiconEntry]:
        return [entry_for(p) for p in self.productions if p.is_lexical]

    @cached_property
    def _entry_index(self) -> dict[tuple, LexiconEntry]:
        return {e.key: e for e in self.lexicon}

    def find_counterpart(self, entry: LexiconEntry, **changed) -> LexiconEntry | None:
        """Entry with the same lemma and category but the given features changed."""
        wanted = replace(entry.features, **changed)
        return self._entry_index.get((entry.lemma, entry.category, wanted))


def entry_for(p: Production) -> LexiconEntry:
    terminals = tuple(s.name for s in p.rhs)
    lemma = p.lemma if p.lemma is not None else " ".join(terminals)
    return LexiconEntry(lemma, p.lhs, p.lhs_features, terminals)


# --- derivations -----------------------------------------------------------


@dataclass(frozen=True)
class Node:
    """Derivation tree node.  Leaf nodes carry a LexiconEntry or a literal."""

    name: str
    features: FeatureBundle
    children: tuple["Node", ...] = ()
    entry: LexiconEntry | None = None
    literal: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.entry is not None or self.literal is not None

    def tokens(self) -> list[str]:
        out: list[str] = []
        self._collect_tokens(out)
        return out

    def _collect_tokens(self, out: list[str]) -> None:
        if self.literal is not None:
            out.append(self.literal)
        elif self.entry is not None:
            out.extend(self.entry.terminals)
        else:
            for child in self.children:
                child._collect_tokens(out)

    def find_all(self, name: str) -> list["Node"]:
        found = [] if self.name != name else [self]
        for child in self.children:
            found.extend(child.find_all(name))
        return found

    def find_unique(self, name: str) -> "Node":
        nodes = self.find_all(name)
        if len(nodes) != 1:
            raise GrammarError(
                f"expected nonterminal {name} exactly once per derivation, found {len(nodes)}"
            )
        return nodes[0]

    def locus_token_index(self, name: str) -> int:
        """Token position of the single leaf derived from nonterminal ``name``."""
        target = self.find_unique(name)
        for leaf, position in _leaves_with_positions(self):
            if leaf is target:
                return position
        raise GrammarError(f"locus {name} did not resolve to a leaf")


def _leaves_with_positions(node: Node) -> list[tuple[Node, int]]:
    out: list[tuple[Node, int]] = []
    pos = 0

    def walk(n: Node) -> None:
        nonlocal pos
        if n.is_leaf:
            out.append((n, pos))
            pos += 1 if n.literal is not None else len(n.entry.terminals)
        else:
            for child in n.children:
                walk(child)

    walk(node)
    return out


# --- parsing ---------------------------------------------------------------

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_FEATURE_KEYS = {"num", "per", "case", "lemma"}


def _split_comment(line: str) -> str:
    """Strip a # comment, ignoring # inside quoted terminals."""
    in_quote = False
    for i, ch in enumerate(line):
        if ch == "'":
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def _parse_features(text: str, lineno: int, col: int) -> tuple[FeatureBundle, str | None]:
    number = person = case = lemma = None
    if not text.strip():
        return EMPTY_FEATURES, None
    for part in text.split(","):
        part = part.strip()
        if "=" not in part:
            raise GrammarError(f"malformed feature {part!r}", lineno, col)
        key, _, value = part.partition("=")
        key, value = key.strip(), value.strip()
        if key == "num":
            if value not in NUMBER_VALUES:
                raise GrammarError(f"unknown feature value num={value}", lineno, col)
            number = value
        elif key == "per":
            if value not in {"1", "2", "3"}:
                raise GrammarError(f"unknown feature value per={value}", lineno, col)
            person = int(value)
        elif key == "case":
            if value not in CASE_VALUES:
                raise GrammarError(f"unknown feature value case={value}", lineno, col)
            case = value
        elif key == "lemma":
            if not value:
                raise GrammarError("empty lemma", lineno, col)
            lemma = value
        else:
            raise GrammarError(f"unknown feature key {key!r}", lineno, col)
    return FeatureBundle(number, person, case), lemma


def _parse_symbols(text: str, lineno: int) -> tuple[list[Symbol], str | None]:
    """Parse one alternative: a sequence of quoted terminals and nonterminals."""
    symbols: list[Symbol] = []
    lemma: str | None = None
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            end = text.find("'", i + 1)
            if end < 0:
                raise GrammarError("unterminated terminal quote", lineno, i + 1)
            symbols.append(Symbol("terminal", text[i + 1 : end]))
            i = end + 1
            continue
        m = _IDENT_RE.match(text, i)
        if not m:
            raise GrammarError(f"unexpected character {ch!r}", lineno, i + 1)
        name = m.group(0)
        i = m.end()
        features = EMPTY_FEATURES
        if i < n and text[i] == "[":
            end = text.find("]", i)
            if end < 0:
                raise GrammarError("unterminated feature bracket", lineno, i + 1)
            features, item_lemma = _parse_features(text[i + 1 : end], lineno, i + 1)
            if item_lemma is not None:
                raise GrammarError("lemma is only allowed on a left-hand side", lineno, i + 1)
            i = end + 1
        symbols.append(Symbol("nonterminal", name, features))
    if not symbols:
        raise GrammarError("empty alternative", lineno)
    return symbols, lemma


def parse_grammar(text: str) -> Grammar:
    """Parse grammar-file content into a validated-enough Grammar.

    Hard errors (syntax, duplicate lexicon keys, undefined nonterminals on a
    right-hand side) raise GrammarError; softer structural problems are left
    to validate_grammar.
    """
    productions: list[Production] = []
    paired: list[tuple[str, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _split_comment(raw).strip()
        if not line:
            continue
        if line.startswith("%"):
            parts = line[1:].split()
            if len(parts) != 3 or parts[0] != "paired":
                raise GrammarError(f"unknown directive {line!r}", lineno)
            _, category, feat = parts
            if feat not in {"number", "person", "case"}:
                raise GrammarError(f"unknown paired feature {feat!r}", lineno)
            paired.append((category, feat))
            continue
        if "->" not in line:
            raise GrammarError("expected 'LHS -> ...'", lineno)
        lhs_text, _, rhs_text = line.partition("->")
        lhs_text = lhs_text.strip()
        m = _IDENT_RE.match(lhs_text)
        if not m or (m.end() != len(lhs_text) and lhs_text[m.end()] != "["):
            raise GrammarError(f"malformed left-hand side {lhs_text!r}", lineno)
        lhs = m.group(0)
        lhs_features, lhs_lemma = EMPTY_FEATURES, None
        rest = lhs_text[m.end() :]
        if rest:
            if not (rest.startswith("[") and rest.endswith("]")):
                raise GrammarError(f"malformed left-hand side {lhs_text!r}", lineno)
            lhs_features, lhs_lemma = _parse_features(rest[1:-1], lineno, m.end() + 1)
        for alt in rhs_text.split("|"):
            symbols, _ = _parse_symbols(alt, lineno)
            prod = Production(lhs, lhs_features, tuple(symbols), lhs_lemma, lineno)
            if lhs_lemma is not None and not prod.is_lexical:
                raise GrammarError("lemma on a non-lexicon production", lineno)
            productions.append(prod)

    if not productions:
        raise GrammarError("grammar has no productions")
    grammar = Grammar(productions[0].lhs, tuple(productions), tuple(paired))

    seen_keys: dict[tuple, int] = {}
    for p in grammar.productions:
        if not p.is_lexical:
            continue
        key = entry_for(p).key
        if key in seen_keys:
            raise GrammarError(
                f"duplicate lexicon key {key} (first defined on line {seen_keys[key]})", p.line
            )
        seen_keys[key] = p.line

    defined = {p.lhs for p in grammar.productions}
    for p in grammar.productions:
        for s in p.rhs:
            if not s.is_terminal and s.name not in defined:
                raise GrammarError(f"unproductive nonterminal {s.name}", p.line)
    return grammar


def render_grammar(g: Grammar) -> str:
    """Canonical one-alternative-per-line rendering; parse(render(g)) == g."""
    lines = [f"%paired {cat} {feat}" for cat, feat in g.paired]
    for p in g.productions:
        lhs = p.lhs
        feats = p.lhs_features.render()
        if p.lemma is not None:
            feats = f"{feats},lemma={p.lemma}" if feats else f"lemma={p.lemma}"
        if feats:
            lhs += f"[{feats}]"
        items = []
        for s in p.rhs:
            if s.is_terminal:
                items.append(f"'{s.name}'")
            elif s.features.is_empty():
                items.append(s.name)
            else:
                items.append(f"{s.name}[{s.features.render()}]")
        lines.append(f"{lhs} -> {' '.join(items)}")
    return "\n".join(lines) + "\n"


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str  # unproductive | unreachable | cycle | unpaired
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


def validate_grammar(g: Grammar) -> list[Diagnostic]:
    """Check the Grammar invariants; an empty list means the grammar is usable."""
    diags: list[Diagnostic] = []
    defined = {p.lhs for p in g.productions}

    for p in g.productions:
        for s in p.rhs:
            if not s.is_terminal and s.name not in defined:
                diags.append(
                    Diagnostic("unproductive", f"unproductive nonterminal {s.name} (line {p.line})")
                )

    reachable = {g.start}
    frontier = [g.start]
    while frontier:
        name = frontier.pop()
        for p in g.productions_for(name):
            for s in p.rhs:
                if not s.is_terminal and s.name not in reachable:
                    reachable.add(s.name)
                    frontier.append(s.name)
    for name in sorted(defined - reachable):
        diags.append(Diagnostic("unreachable", f"nonterminal {name} is unreachable from {g.start}"))

    cycle = _find_cycle(g)
    if cycle:
        diags.append(Diagnostic("cycle", "recursive nonterminals: " + " -> ".join(cycle)))

    for category, feat in g.paired:
        diags.extend(_check_pairing(g, category, feat))
    return diags


def _find_cycle(g: Grammar) -> list[str] | None:
    edges: dict[str, set[str]] = {}
    for p in g.productions:
        edges.setdefault(p.lhs, set()).update(s.name for s in p.rhs if not s.is_terminal)
    WHITE, GREY, BLACK = 0, 1, 2
    color = {name: WHITE for name in edges}
    stack: list[str] = []

    def visit(name: str) -> list[str] | None:
        color[name] = GREY
        stack.append(name)
        for nxt in sorted(edges.get(name, ())):
            if nxt not in color:
                continue
            if color[nxt] == GREY:
                return stack[stack.index(nxt) :] + [nxt]
            if color[nxt] == WHITE:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        color[name] = BLACK
        return None

    for name in edges:
        if color[name] == WHITE:
            found = visit(name)
            if found:
                return found
    return None


NUMBER_FLIP = {"sg": "pl", "pl": "sg"}
CASE_FLIP = {"acc": "dat", "dat": "acc"}


def _check_pairing(g: Grammar, category: str, feat: str) -> list[Diagnostic]:
    diags = []
    for entry in g.lexicon:
        if entry.category != category:
            continue
        if feat == "number":
            value = entry.features.number
            if value is None:
                continue
            counterpart = g.find_counterpart(entry, number=NUMBER_FLIP[value])
        elif feat == "person":
            if entry.features.person in (None, 3):
                continue
            counterpart = g.find_counterpart(entry, person=3)
        else:  # case
            value = entry.features.case
            if value not in ("acc", "dat"):
                continue
            counterpart = g.find_counterpart(entry, case=CASE_FLIP[value])
        if counterpart is None:
            diags.append(
                Diagnostic(
                    "unpaired",
                    f"unpaired lemma {entry.lemma!r} in {category}: "
                    f"no {feat}-flipped form for {entry.surface!r}",
                )
            )
    return diags


# --- enumeration -----------------------------------------------------------


def enumerate_sentences(g: Grammar) -> list[tuple[Node, list[str]]]:
    """All derivations licensed by g, in deterministic file order.

    Alternatives are expanded in file order with the leftmost symbol varying
    slowest, matching the order productions are written.  Feature unification
    filters out disagreeing expansions.
    """
    results: list[tuple[Node, list[str]]] = []
    for tree in _expand_symbol(g, Symbol("nonterminal", g.start)):
        results.append((tree, tree.tokens()))
    return results


def _expand_symbol(g: Grammar, symbol: Symbol):
    if symbol.is_terminal:
        yield Node(symbol.name, EMPTY_FEATURES, literal=symbol.name)
        return
    for p in g.productions_for(symbol.name):
        unified = symbol.features.unify(p.lhs_features)
        if unified is None:
            continue
        if p.is_lexical:
            yield Node(symbol.name, unified, entry=entry_for(p))
        else:
            for children in _expand_sequence(g, p.rhs, 0):
                yield Node(symbol.name, unified, children=tuple(children))


def _expand_sequence(g: Grammar, rhs: tuple[Symbol, ...], i: int):
    if i == len(rhs):
        yield []
        return
    for head in _expand_symbol(g, rhs[i]):
        for tail in _expand_sequence(g, rhs, i + 1):
            yield [head] + tail
