"""Deterministic NL surface for clauses and queries.

Every clause shape the generator or the perturbations can produce has
exactly one template, and parsing is its exact inverse: parse_sentence
(realize_clause(c)) == c and realize round-trips strings. Quantified
rules introduce their variable as "someone" in the body and refer back
with "they"/"them"; the head-first surface order is reserved for ground
rules so the anaphor is always introduced before it is used.

The lexicon (10 names, 12 attributes, 8 transitive verbs) and the
template strings live in versioned TSV data files; datasets record the
template-table version they were realized with.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from .errors import ParseError, UnsupportedShape
from .logic import Atom, Clause, Literal, Query, Rule, Theory, const, var

_VAR_NAME = "X"


@dataclass(frozen=True)
class Lexicon:
    version: str
    names: tuple[str, ...]
    attributes: tuple[str, ...]
    verbs: dict[str, str]  # base -> third-person singular

    @property
    def verbs_3sg(self) -> dict[str, str]:
        return {v: k for k, v in self.verbs.items()}


@dataclass(frozen=True)
class TemplateTable:
    version: str
    patterns: dict[str, str]
    lexicon: Lexicon


def _read_rows(filename: str) -> list[list[str]]:
    text = resources.files("logicprobe.data").joinpath(filename).read_text(encoding="utf-8")
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        rows.append(line.split("\t"))
    return rows


def load_lexicon() -> Lexicon:
    names, attributes, verbs, version = [], [], {}, "0"
    for row in _read_rows("lexicon.tsv"):
        kind = row[0]
        if kind == "version":
            version = row[1]
        elif kind == "name":
            names.append(row[1])
        elif kind == "attribute":
            attributes.append(row[1])
        elif kind == "verb":
            verbs[row[1]] = row[2]
    return Lexicon(version, tuple(names), tuple(attributes), verbs)


def load_template_table() -> TemplateTable:
    patterns, version = {}, "0"
    for row in _read_rows("templates.tsv"):
        if row[0] == "version":
            version = row[1]
        else:
            patterns[row[0]] = row[1]
    return TemplateTable(version, patterns, load_lexicon())


DEFAULT_TABLE = load_template_table()
TEMPLATE_TABLE_VERSION = DEFAULT_TABLE.version


# ---------------------------------------------------------------------------
# realization


class _Anaphor:
    """Tracks whether the rule variable has been introduced yet."""

    def __init__(self) -> None:
        self.introduced = False


def _noun(table: TemplateTable, term, state: _Anaphor, position: str) -> tuple[str, bool]:
    """Render a term; returns (text, subject_is_plural)."""
    if not term.is_variable:
        if term.name not in table.lexicon.names:
            raise UnsupportedShape(f"constant {term.name!r} is not a lexicon name")
        return term.name.capitalize(), False
    if not state.introduced:
        state.introduced = True
        return table.patterns["var_intro"], False
    if position == "subject":
        return table.patterns["var_subject"], True
    return table.patterns["var_object"], False


def _fragment(table: TemplateTable, lit: Literal, state: _Anaphor) -> str:
    atom = lit.atom
    if len(atom.args) == 1:
        if atom.predicate not in table.lexicon.attributes:
            raise UnsupportedShape(f"{atom.predicate!r} is not a lexicon attribute")
        subject, plural = _noun(table, atom.args[0], state, "subject")
        shape = "fact_attr" + ("_plural" if plural else "") + ("_neg" if lit.negated else "")
        return table.patterns[shape].format(s=subject, a=atom.predicate)
    if len(atom.args) == 2:
        if atom.predicate not in table.lexicon.verbs:
            raise UnsupportedShape(f"{atom.predicate!r} is not a lexicon verb")
        subject, plural = _noun(table, atom.args[0], state, "subject")
        obj, _ = _noun(table, atom.args[1], state, "object")
        shape = "fact_rel" + ("_plural" if plural else "") + ("_neg" if lit.negated else "")
        return table.patterns[shape].format(
            s=subject, o=obj, v=table.lexicon.verbs[atom.predicate], vb=atom.predicate
        )
    raise UnsupportedShape("propositional atoms have no sentence template")


def _sentence(text: str) -> str:
    return text[0].upper() + text[1:] + "."


def realize_clause(clause: Clause, table: TemplateTable = DEFAULT_TABLE) -> str:
    """One declarative sentence for a fact or rule."""
    if isinstance(clause, Atom):
        return _sentence(_fragment(table, Literal(clause), _Anaphor()))
    state = _Anaphor()
    glue = f" {table.patterns['glue_and']} "
    body = glue.join(_fragment(table, lit, state) for lit in clause.body)
    head = _fragment(table, Literal(clause.head), state)
    if clause.head_first and not clause.variables:
        return _sentence(table.patterns["rule_head_first"].format(head=head, body=body))
    return _sentence(table.patterns["rule_if_then"].format(head=head, body=body))


def realize_query(query: Query, table: TemplateTable = DEFAULT_TABLE) -> str:
    return _sentence(_fragment(table, query.literal, _Anaphor()))


def realize_context(theory: Theory, table: TemplateTable = DEFAULT_TABLE) -> tuple[str, ...]:
    return tuple(realize_clause(s.clause, table) for s in theory.sentences)


def negate_query(nl_query: str, query: Query, table: TemplateTable = DEFAULT_TABLE) -> tuple[str, Query]:
    """Toggle NAF polarity; rewrites the sentence through the template."""
    toggled = Query(Literal(query.atom, not query.naf))
    return realize_query(toggled, table), toggled


# ---------------------------------------------------------------------------
# parsing (exact inverse of the templates above)


def _parse_noun(table: TemplateTable, token: str, state: _Anaphor, position: str):
    word = token.lower()
    if word in table.lexicon.names:
        return const(word)
    if word == table.patterns["var_intro"]:
        if state.introduced:
            raise ParseError(f"{word!r} reintroduced")
        state.introduced = True
        return var(_VAR_NAME)
    if position == "subject" and word == table.patterns["var_subject"]:
        if not state.introduced:
            raise ParseError(f"{word!r} before its introduction")
        return var(_VAR_NAME)
    if position == "object" and word == table.patterns["var_object"]:
        if not state.introduced:
            raise ParseError(f"{word!r} before its introduction")
        return var(_VAR_NAME)
    raise ParseError(f"unknown noun {token!r}")


def _parse_fragment(table: TemplateTable, text: str, state: _Anaphor) -> Literal:
    lex = table.lexicon
    words = text.split(" ")
    if "" in words or len(words) < 3:
        raise ParseError(f"malformed fragment {text!r}")
    subject = _parse_noun(table, words[0], state, "subject")
    plural = subject.is_variable and words[0].lower() == table.patterns["var_subject"]
    be, do = ("are", "do") if plural else ("is", "does")
    rest = words[1:]
    if rest[0] == be:
        if len(rest) == 3 and rest[1] == "not" and rest[2] in lex.attributes:
            return Literal(Atom(rest[2], (subject,)), True)
        if len(rest) == 2 and rest[1] in lex.attributes:
            return Literal(Atom(rest[1], (subject,)))
        raise ParseError(f"bad attribute fragment {text!r}")
    if rest[0] == do and len(rest) == 4 and rest[1] == "not" and rest[2] in lex.verbs:
        obj = _parse_noun(table, rest[3], state, "object")
        return Literal(Atom(rest[2], (subject, obj)), True)
    verb_map = lex.verbs if plural else lex.verbs_3sg
    if len(rest) == 2 and rest[0] in verb_map:
        base = rest[0] if plural else verb_map[rest[0]]
        obj = _parse_noun(table, rest[1], state, "object")
        return Literal(Atom(base, (subject, obj)))
    raise ParseError(f"unrecognized fragment {text!r}")


def _strip_period(sentence: str) -> str:
    s = sentence.strip()
    if not s.endswith("."):
        raise ParseError("sentence must end with '.'")
    return s[:-1]


def parse_sentence(sentence: str, table: TemplateTable = DEFAULT_TABLE) -> Clause:
    """Invert realize_clause: returns the fact or rule behind the sentence."""
    body_text = _strip_period(sentence)
    glue = f" {table.patterns['glue_and']} "
    if body_text.startswith("If "):
        if " then " not in body_text:
            raise ParseError("conditional without 'then'")
        cond, _, head_text = body_text[3:].partition(" then ")
        state = _Anaphor()
        body = tuple(_parse_fragment(table, frag, state) for frag in cond.split(glue))
        head = _parse_fragment(table, head_text, state)
        if head.negated:
            raise ParseError("rule heads cannot be negated")
        return Rule(head.atom, body, head_first=False)
    if " if " in body_text:
        head_text, _, cond = body_text.partition(" if ")
        state = _Anaphor()
        head = _parse_fragment(table, head_text, state)
        body = tuple(_parse_fragment(table, frag, state) for frag in cond.split(glue))
        if head.negated:
            raise ParseError("rule heads cannot be negated")
        if any(t.is_variable for lit in (head,) + body for t in lit.atom.args):
            raise ParseError("head-first rules must be ground")
        return Rule(head.atom, body, head_first=True)
    lit = _parse_fragment(table, body_text, _Anaphor())
    if lit.negated:
        raise ParseError("context sentences are positive; negation only occurs in queries")
    if not lit.atom.is_ground:
        raise ParseError("facts must be ground")
    return lit.atom


def parse_query_sentence(sentence: str, table: TemplateTable = DEFAULT_TABLE) -> Query:
    """Invert realize_query; accepts both polarities."""
    lit = _parse_fragment(table, _strip_period(sentence), _Anaphor())
    if not lit.atom.is_ground:
        raise ParseError("queries must be ground")
    return Query(lit)
