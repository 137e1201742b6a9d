"""Stratified logic programs: syntax, parsing, evaluation, and proof metadata.

Programs are function-free, with predicates of arity 0..2, negation as
failure in rule bodies, and at most one distinct variable per rule.
Evaluation computes the standard perfect model, stratum by stratum, under
the closed-world assumption: quantified rules are grounded over the
constants mentioned in the theory (plus any extra constants supplied by
the caller, e.g. from a query), then each stratum runs to a least
fixpoint with lower strata already complete.

Text format, one clause per line:

    happy(anne).
    likes(anne, john).
    smart(X) :- not happy(X).
    c :- a, b.
    % comment

Facts must be ground. Head variables must occur somewhere in the body.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import NonStratifiedError, ParseError

# ---------------------------------------------------------------------------
# terms, atoms, literals, rules


@dataclass(frozen=True)
class Term:
    name: str
    is_variable: bool = False

    def __repr__(self) -> str:
        return self.name


def const(name: str) -> Term:
    return Term(name, False)


def var(name: str) -> Term:
    return Term(name, True)


@dataclass(frozen=True)
class Atom:
    """predicate(args); arity 0 (propositional), 1 (attribute), or 2 (relation)."""

    predicate: str
    args: tuple[Term, ...] = ()

    @property
    def is_ground(self) -> bool:
        return all(not t.is_variable for t in self.args)

    @property
    def variables(self) -> tuple[Term, ...]:
        return tuple(t for t in self.args if t.is_variable)

    def substitute(self, binding: dict[str, Term]) -> "Atom":
        return Atom(self.predicate, tuple(binding.get(t.name, t) if t.is_variable else t for t in self.args))

    def __repr__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(t.name for t in self.args)})"


@dataclass(frozen=True)
class Literal:
    """An atom or its negation-as-failure (`not atom`)."""

    atom: Atom
    negated: bool = False

    def substitute(self, binding: dict[str, Term]) -> "Literal":
        return Literal(self.atom.substitute(binding), self.negated)

    def __repr__(self) -> str:
        return ("not " if self.negated else "") + repr(self.atom)


@dataclass(frozen=True)
class Rule:
    """head :- body. `head_first` only selects the NL surface order."""

    head: Atom
    body: tuple[Literal, ...]
    head_first: bool = field(default=False, compare=False)

    @property
    def variables(self) -> frozenset[str]:
        names = {t.name for t in self.head.variables}
        for lit in self.body:
            names.update(t.name for t in lit.atom.variables)
        return frozenset(names)

    def __repr__(self) -> str:
        return f"{self.head!r} :- {', '.join(map(repr, self.body))}"


Clause = Atom | Rule  # a fact is a ground Atom


@dataclass(frozen=True)
class Sentence:
    """One context sentence: a clause with its stable identifier."""

    sid: int
    clause: Clause


@dataclass(frozen=True)
class Theory:
    """Ordered sentences; order matches the NL context realization."""

    sentences: tuple[Sentence, ...]

    @property
    def facts(self) -> tuple[tuple[int, Atom], ...]:
        return tuple((s.sid, s.clause) for s in self.sentences if isinstance(s.clause, Atom))

    @property
    def rules(self) -> tuple[tuple[int, Rule], ...]:
        return tuple((s.sid, s.clause) for s in self.sentences if isinstance(s.clause, Rule))

    @property
    def sentence_ids(self) -> tuple[int, ...]:
        return tuple(s.sid for s in self.sentences)

    def constants(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.sentences:
            atoms = [s.clause] if isinstance(s.clause, Atom) else [s.clause.head] + [l.atom for l in s.clause.body]
            for a in atoms:
                for t in a.args:
                    if not t.is_variable:
                        seen.setdefault(t.name, None)
        return tuple(seen)

    def predicates(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for s in self.sentences:
            atoms = [s.clause] if isinstance(s.clause, Atom) else [s.clause.head] + [l.atom for l in s.clause.body]
            for a in atoms:
                seen.setdefault(a.predicate, None)
        return tuple(seen)


def theory_from_clauses(clauses: list[Clause] | tuple[Clause, ...]) -> Theory:
    return Theory(tuple(Sentence(i, c) for i, c in enumerate(clauses)))


@dataclass(frozen=True)
class Query:
    """A ground literal asked against a theory."""

    literal: Literal

    @property
    def atom(self) -> Atom:
        return self.literal.atom

    @property
    def naf(self) -> bool:
        return self.literal.negated


@dataclass(frozen=True)
class PerfectModel:
    true_atoms: frozenset[Atom]
    strata: tuple[frozenset[str], ...]

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.true_atoms


@dataclass(frozen=True)
class ProofInfo:
    """Minimal-derivation metadata for a query.

    For a query atom with a positive derivation: depth is the longest
    chain of rule applications in a minimal-depth derivation and the
    supporting ids are the sentences it uses. Otherwise both describe the
    exhaustive failed backward exploration of the atom (depth 0 and
    length 0 exactly when no fact or rule head unifies with it).
    depth <= length holds on generated corpora; see module docs.
    """

    supporting_sentence_ids: frozenset[int]
    depth: int

    @property
    def length(self) -> int:
        return len(self.supporting_sentence_ids)


@dataclass(frozen=True)
class Sample:
    """One entailment instance: logical core plus its NL surface."""

    query: Query
    theory: Theory
    label: bool
    proof_depth: int
    proof_length: int
    nl_query: str
    nl_context: tuple[str, ...]


# ---------------------------------------------------------------------------
# parsing

_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


def _parse_term(tok: str) -> Term:
    return var(tok) if tok[0].isupper() else const(tok)


def _parse_atom(text: str, line_no: int, col: int) -> Atom:
    text = text.strip()
    m = _IDENT.match(text)
    if not m:
        raise ParseError(f"expected an atom, got {text!r}", line_no, col)
    name = m.group(0)
    rest = text[m.end():].strip()
    if not rest:
        return Atom(name)
    if not (rest.startswith("(") and rest.endswith(")")):
        raise ParseError(f"malformed arguments in {text!r}", line_no, col)
    inner = rest[1:-1].strip()
    if not inner:
        raise ParseError("empty argument list", line_no, col)
    parts = [p.strip() for p in inner.split(",")]
    if len(parts) > 2:
        raise ParseError(f"arity {len(parts)} exceeds 2 in {text!r}", line_no, col)
    for p in parts:
        if not p or not _IDENT.fullmatch(p):
            raise ParseError(f"bad term {p!r} in {text!r}", line_no, col)
    return Atom(name, tuple(_parse_term(p) for p in parts))


def _parse_literal(text: str, line_no: int, col: int) -> Literal:
    text = text.strip()
    if text.startswith("not ") or text == "not":
        body = text[3:].strip()
        if not body:
            raise ParseError("dangling 'not'", line_no, col)
        return Literal(_parse_atom(body, line_no, col), True)
    return Literal(_parse_atom(text, line_no, col), False)


def _split_top_commas(text: str) -> list[str]:
    # commas inside parentheses separate atom arguments, not body literals
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(text[start:i])
            start = i + 1
    parts.append(text[start:])
    return parts


def parse_clause(line: str, line_no: int = 1) -> Clause:
    """Parse one clause (no trailing period handling beyond the final dot)."""
    stripped = line.strip()
    if not stripped.endswith("."):
        raise ParseError("clause must end with '.'", line_no, len(line))
    body_text = stripped[:-1].strip()
    if not body_text:
        raise ParseError("empty clause", line_no, 1)
    if ":-" in body_text:
        head_text, _, tail = body_text.partition(":-")
        if not tail.strip():
            raise ParseError("rule with empty body", line_no, body_text.index(":-") + 1)
        head = _parse_atom(head_text, line_no, 1)
        lits = tuple(_parse_literal(p, line_no, 1) for p in _split_top_commas(tail))
        if any(not p.strip() for p in _split_top_commas(tail)):
            raise ParseError("empty body literal", line_no, 1)
        rule = Rule(head, lits)
        _validate_rule(rule, line_no)
        return rule
    atom = _parse_atom(body_text, line_no, 1)
    if not atom.is_ground:
        raise ParseError(f"facts must be ground, got {atom!r}", line_no, 1)
    return atom


def _validate_rule(rule: Rule, line_no: int) -> None:
    if rule.head.predicate == "not":
        raise ParseError("negation cannot appear in a rule head", line_no, 1)
    names = rule.variables
    if len(names) > 1:
        raise ParseError(f"more than one distinct variable in rule: {sorted(names)}", line_no, 1)
    body_vars = {t.name for lit in rule.body for t in lit.atom.variables}
    for t in rule.head.variables:
        if t.name not in body_vars:
            raise ParseError(f"head variable {t.name} does not occur in the body", line_no, 1)


def parse_program(text: str) -> Theory:
    """Parse a full program; sentence ids follow source order.

    Raises ParseError with line/column on malformed input, inconsistent
    predicate arity, or rule-shape violations.
    """
    clauses: list[Clause] = []
    arities: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0].strip()
        if not line:
            continue
        clause = parse_clause(line, line_no)
        atoms = [clause] if isinstance(clause, Atom) else [clause.head] + [l.atom for l in clause.body]
        for a in atoms:
            want = arities.setdefault(a.predicate, len(a.args))
            if want != len(a.args):
                raise ParseError(
                    f"predicate {a.predicate} used with arity {len(a.args)} and {want}", line_no, 1
                )
        clauses.append(clause)
    return theory_from_clauses(clauses)


def parse_query_text(text: str) -> Query:
    """Parse a query literal such as 'happy(anne)' or 'not happy(anne)'."""
    lit = _parse_literal(text.strip().rstrip("."), 1, 1)
    if not lit.atom.is_ground:
        raise ParseError("queries must be ground")
    return Query(lit)


def clause_to_text(clause: Clause) -> str:
    if isinstance(clause, Atom):
        return f"{clause!r}."
    return f"{clause.head!r} :- {', '.join(map(repr, clause.body))}."


def program_to_text(theory: Theory) -> str:
    """Canonical serialization; parse_program round-trips it."""
    return "\n".join(clause_to_text(s.clause) for s in theory.sentences) + ("\n" if theory.sentences else "")


def query_to_text(query: Query) -> str:
    return repr(query.literal)


# ---------------------------------------------------------------------------
# stratification

def _dependency_edges(theory: Theory) -> list[tuple[str, str, bool]]:
    """(head_pred, body_pred, negative) for every rule body literal."""
    edges = []
    for _, rule in theory.rules:
        for lit in rule.body:
            edges.append((rule.head.predicate, lit.atom.predicate, lit.negated))
    return edges


def _negative_cycle(theory: Theory) -> tuple[str, ...] | None:
    """Find one cycle through a negative edge, if any (DFS per negative edge)."""
    adj: dict[str, set[str]] = {}
    for h, b, _ in _dependency_edges(theory):
        adj.setdefault(h, set()).add(b)
        adj.setdefault(b, set())
    for h, b, neg in _dependency_edges(theory):
        if not neg:
            continue
        # cycle exists iff h is reachable from b
        stack, seen, parent = [b], {b}, {}
        while stack:
            node = stack.pop()
            if node == h:
                path = [h]
                while path[-1] != b:
                    path.append(parent[path[-1]])
                path.append(h)
                return tuple(reversed(path))
            for nxt in sorted(adj.get(node, ())):
                if nxt not in seen:
                    seen.add(nxt)
                    parent[nxt] = node
                    stack.append(nxt)
    return None


def stratify(theory: Theory) -> tuple[frozenset[str], ...]:
    """Partition predicates into ordered strata; NAF edges cross strictly upward.

    Raises NonStratifiedError (with one offending cycle) iff the dependency
    graph has a cycle containing a negative edge.
    """
    preds = list(theory.predicates())
    level = {p: 0 for p in preds}
    edges = _dependency_edges(theory)
    n = max(len(preds), 1)
    for _ in range(n * n + 1):
        changed = False
        for h, b, neg in edges:
            need = level[b] + (1 if neg else 0)
            if level[h] < need:
                level[h] = need
                changed = True
        if not changed:
            break
        if max(level.values(), default=0) > n:
            break
    if max(level.values(), default=0) > n:
        cycle = _negative_cycle(theory)
        assert cycle is not None
        raise NonStratifiedError(cycle)
    strata: dict[int, set[str]] = {}
    for p in preds:
        strata.setdefault(level[p], set()).add(p)
    return tuple(frozenset(strata[k]) for k in sorted(strata))


# ---------------------------------------------------------------------------
# grounding and evaluation

def _ground_rules(theory: Theory, extra_constants: tuple[str, ...]) -> list[tuple[int, Rule]]:
    """Instantiate each quantified rule over the constant domain (sid kept)."""
    domain = list(theory.constants())
    for c in extra_constants:
        if c not in domain:
            domain.append(c)
    grounded: list[tuple[int, Rule]] = []
    for sid, rule in theory.rules:
        names = rule.variables
        if not names:
            grounded.append((sid, rule))
            continue
        (name,) = names  # parser enforces at most one distinct variable
        for c in domain:
            binding = {name: const(c)}
            grounded.append(
                (sid, Rule(rule.head.substitute(binding), tuple(l.substitute(binding) for l in rule.body)))
            )
    return grounded


def evaluate(theory: Theory, extra_constants: tuple[str, ...] = ()) -> PerfectModel:
    """Perfect model via stratum-by-stratum semi-naive least fixpoints.

    Raises NonStratifiedError when no stratification exists. Deterministic:
    equal theories yield equal models.
    """
    strata = stratify(theory)
    grounded = _ground_rules(theory, extra_constants)
    model: set[Atom] = {atom for _, atom in theory.facts}
    for stratum in strata:
        layer_rules = [(sid, r) for sid, r in grounded if r.head.predicate in stratum]
        delta = set(model)
        while True:
            fresh: set[Atom] = set()
            for _, rule in layer_rules:
                if rule.head in model:
                    continue
                pos = [l.atom for l in rule.body if not l.negated]
                if any(a not in model for a in pos):
                    continue
                if any(l.atom in model for l in rule.body if l.negated):
                    continue
                # semi-naive: require a new positive atom unless the body has none
                if pos and delta and not any(a in delta for a in pos):
                    continue
                fresh.add(rule.head)
            fresh -= model
            if not fresh:
                # one full pass with delta cleared catches no-positive-body rules
                if delta:
                    delta = set()
                    continue
                break
            model |= fresh
            delta = fresh
    return PerfectModel(frozenset(model), strata)


def naive_fixpoint_oracle(theory: Theory, extra_constants: tuple[str, ...] = ()) -> PerfectModel:
    """Reference evaluator: full re-derivation every pass, per stratum.

    Slow and obviously correct; used by the tests to cross-check evaluate.
    """
    strata = stratify(theory)
    grounded = _ground_rules(theory, extra_constants)
    model: set[Atom] = {atom for _, atom in theory.facts}
    for stratum in strata:
        layer_rules = [r for _, r in grounded if r.head.predicate in stratum]
        while True:
            derived = set(model)
            for rule in layer_rules:
                ok = all(l.atom in model for l in rule.body if not l.negated) and not any(
                    l.atom in model for l in rule.body if l.negated
                )
                if ok:
                    derived.add(rule.head)
            if derived == model:
                break
            model = derived
    return PerfectModel(frozenset(model), strata)


def entails(theory: Theory, query: Query) -> bool:
    """Closed-world truth of a ground query. `not a` is true iff `a` is not.

    Grounding includes the query's constants, so quantified rules apply to
    entities mentioned only in the query.
    """
    extra = tuple(t.name for t in query.atom.args if not t.is_variable)
    model = evaluate(theory, extra)
    truth = query.atom in model.true_atoms
    return (not truth) if query.naf else truth


# ---------------------------------------------------------------------------
# proof extraction

def _min_depths(theory: Theory, model: PerfectModel, grounded: list[tuple[int, Rule]]) -> dict[Atom, int]:
    """Minimal derivation depth per true atom (facts at 0)."""
    depth: dict[Atom, int] = {}
    for _, atom in theory.facts:
        depth[atom] = 0
    applicable = []
    for sid, rule in grounded:
        if rule.head not in model.true_atoms:
            continue
        pos = [l.atom for l in rule.body if not l.negated]
        if any(a not in model.true_atoms for a in pos):
            continue
        if any(l.atom in model.true_atoms for l in rule.body if l.negated):
            continue
        applicable.append((sid, rule, pos))
    changed = True
    while changed:
        changed = False
        for sid, rule, pos in applicable:
            if any(a not in depth for a in pos):
                continue
            cand = 1 + max((depth[a] for a in pos), default=0)
            if depth.get(rule.head, cand + 1) > cand:
                depth[rule.head] = cand
                changed = True
    return depth


def _positive_proof(theory: Theory, query_atom: Atom, model: PerfectModel,
                    grounded: list[tuple[int, Rule]]) -> ProofInfo:
    depth = _min_depths(theory, model, grounded)
    fact_sids: dict[Atom, int] = {}
    for sid, atom in theory.facts:
        fact_sids.setdefault(atom, sid)

    candidates: dict[Atom, list[tuple[int, Rule, list[Atom]]]] = {}
    for sid, rule in grounded:
        if rule.head not in model.true_atoms:
            continue
        pos = [l.atom for l in rule.body if not l.negated]
        if any(a not in model.true_atoms for a in pos):
            continue
        if any(l.atom in model.true_atoms for l in rule.body if l.negated):
            continue
        candidates.setdefault(rule.head, []).append((sid, rule, pos))

    support_memo: dict[Atom, frozenset[int]] = {}

    def support(atom: Atom) -> frozenset[int]:
        if atom in support_memo:
            return support_memo[atom]
        if depth[atom] == 0:
            out = frozenset({fact_sids[atom]})
        else:
            # among rules achieving the minimal depth, take the lowest sid
            best: tuple[int, Rule, list[Atom]] | None = None
            for sid, rule, pos in candidates.get(atom, ()):
                if all(b in depth for b in pos) and 1 + max((depth[b] for b in pos), default=0) == depth[atom]:
                    if best is None or sid < best[0]:
                        best = (sid, rule, pos)
            assert best is not None
            sid, _, pos = best
            acc = {sid}
            for b in pos:
                acc |= support(b)
            out = frozenset(acc)
        support_memo[atom] = out
        return out

    return ProofInfo(support(query_atom), depth[query_atom])


def _failed_exploration(theory: Theory, query_atom: Atom,
                        grounded: list[tuple[int, Rule]]) -> ProofInfo:
    """Exhaustive backward exploration of an underivable (or NAF) goal.

    Examined sentences: matching facts, rules whose heads equal the goal,
    and recursively everything reachable through their body atoms (both
    polarities). Depth is the exploration height with back-edges cut.
    """
    by_head: dict[Atom, list[tuple[int, Rule]]] = {}
    for sid, rule in grounded:
        by_head.setdefault(rule.head, []).append((sid, rule))
    fact_sids: dict[Atom, list[int]] = {}
    for sid, atom in theory.facts:
        fact_sids.setdefault(atom, []).append(sid)

    examined: set[int] = set()
    height_memo: dict[Atom, int] = {}
    on_path: set[Atom] = set()

    def explore(goal: Atom) -> int:
        if goal in height_memo:
            return height_memo[goal]
        if goal in on_path:
            return 0
        on_path.add(goal)
        examined.update(fact_sids.get(goal, ()))
        best = 0
        for sid, rule in sorted(by_head.get(goal, ()), key=lambda x: x[0]):
            examined.add(sid)
            sub = 0
            for lit in rule.body:
                sub = max(sub, explore(lit.atom))
            best = max(best, 1 + sub)
        on_path.discard(goal)
        height_memo[goal] = best
        return best

    h = explore(query_atom)
    return ProofInfo(frozenset(examined), h if examined else 0)


def extract_proof(theory: Theory, query: Query) -> ProofInfo:
    """Proof metadata for the query's atom (polarity only affects the label).

    With a positive derivation: minimal depth, ties among rules broken by
    lowest sentence id, supporting sentences of that derivation. Without
    one: the failed-exploration metadata (see _failed_exploration).
    length = 0 iff no context fact or rule head unifies with the atom.
    """
    extra = tuple(t.name for t in query.atom.args if not t.is_variable)
    model = evaluate(theory, extra)
    grounded = _ground_rules(theory, extra)
    if query.atom in model.true_atoms:
        return _positive_proof(theory, query.atom, model, grounded)
    return _failed_exploration(theory, query.atom, grounded)
