"""Synthetic entailment dataset generator.

Theories are built over the bundled lexicon: attribute and relation
facts plus rules whose bodies may negate (rejection-sampled until
stratified). Each theory plants one rule chain so that every requested
proof depth is reachable. Queries are drawn against the solver: labels
always come from entails, and the recorded proof metadata always comes
from extract_proof, never from construction shortcuts.

Determinism: sample i of a split draws everything from an rng derived
from (rng_seed, split, i), so datasets are order-stable and reproducible
byte for byte regardless of worker scheduling.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import GenerationExhausted, NoQueryFound, NonStratifiedError
from .logic import (
    Atom,
    Clause,
    Literal,
    Query,
    Rule,
    Sample,
    Theory,
    _failed_exploration,
    _ground_rules,
    _positive_proof,
    const,
    entails,
    evaluate,
    extract_proof,
    stratify,
    theory_from_clauses,
    var,
)
from .nl import DEFAULT_TABLE, TemplateTable, realize_context, realize_query
from .seeding import rng_for

# rate at which generated queries use NAF polarity (their proof metadata
# describes the complement atom, so depth buckets stay meaningful)
NAF_QUERY_RATE = 0.25

_MAX_THEORY_ATTEMPTS = 60
_MAX_STRATIFY_ATTEMPTS = 200


@dataclass(frozen=True)
class GenConfig:
    rng_seed: int = 0
    n_samples: int = 1000
    depth_range: tuple[int, ...] = (0, 1, 2)
    facts_per_theory: tuple[int, int] = (3, 6)
    rules_per_theory: tuple[int, int] = (2, 5)
    naf_body_probability: float = 0.15
    quantified_rule_probability: float = 0.5
    lexicon: str = "builtin"

    def __post_init__(self):
        if not self.depth_range or any(d < 0 or d > 5 for d in self.depth_range):
            raise ValueError("depth_range must be a non-empty subset of [0..5]")
        if self.n_samples < 0:
            raise ValueError("n_samples must be nonnegative")

    def table(self) -> TemplateTable:
        if self.lexicon != "builtin":
            raise ValueError(f"unknown lexicon reference {self.lexicon!r}")
        return DEFAULT_TABLE


@dataclass(frozen=True)
class Dataset:
    samples: tuple[Sample, ...]
    ids: tuple[str, ...]
    split: str
    provenance: tuple[tuple[str, str], ...]

    def __len__(self) -> int:
        return len(self.samples)


def _pick(rng: np.random.Generator, pool) -> str:
    return pool[int(rng.integers(len(pool)))]


def _random_fact(rng: np.random.Generator, entities, attrs, verbs) -> Atom:
    if rng.random() < 0.7 or not verbs:
        return Atom(_pick(rng, attrs), (const(_pick(rng, entities)),))
    return Atom(_pick(rng, verbs), (const(_pick(rng, entities)), const(_pick(rng, entities))))


def _random_rule_atom(rng, entities, attrs, verbs, use_var: bool) -> Atom:
    if rng.random() < 0.7 or not verbs:
        subject = var("X") if use_var else const(_pick(rng, entities))
        return Atom(_pick(rng, attrs), (subject,))
    a = var("X") if use_var and rng.random() < 0.5 else const(_pick(rng, entities))
    b = var("X") if use_var and not a.is_variable else const(_pick(rng, entities))
    return Atom(_pick(rng, verbs), (a, b))


def generate_theory(config: GenConfig, rng: np.random.Generator) -> Theory:
    """One stratified theory; rejection-samples the NAF structure."""
    lex = config.table().lexicon
    for _ in range(_MAX_STRATIFY_ATTEMPTS):
        entities = [str(x) for x in rng.choice(lex.names, size=int(rng.integers(2, 5)), replace=False)]
        attrs = [str(x) for x in rng.choice(lex.attributes, size=int(rng.integers(4, 8)), replace=False)]
        verbs = [str(x) for x in rng.choice(sorted(lex.verbs), size=int(rng.integers(1, 3)), replace=False)]
        n_facts = int(rng.integers(config.facts_per_theory[0], config.facts_per_theory[1] + 1))
        n_rules = int(rng.integers(config.rules_per_theory[0], config.rules_per_theory[1] + 1))

        clauses: list[Clause] = []
        max_depth = max(config.depth_range)
        chain_len = int(rng.integers(0, min(max_depth, n_rules) + 1))
        if chain_len and len(attrs) > chain_len:
            chain_attrs = attrs[: chain_len + 1]
            anchor = _pick(rng, entities)
            clauses.append(Atom(chain_attrs[0], (const(anchor),)))
            for lo, hi in zip(chain_attrs, chain_attrs[1:]):
                if rng.random() < config.quantified_rule_probability:
                    clauses.append(Rule(Atom(hi, (var("X"),)), (Literal(Atom(lo, (var("X"),))),)))
                else:
                    clauses.append(Rule(Atom(hi, (const(anchor),)), (Literal(Atom(lo, (const(anchor),))),)))

        while sum(isinstance(c, Atom) for c in clauses) < n_facts:
            clauses.append(_random_fact(rng, entities, attrs, verbs))
        while sum(isinstance(c, Rule) for c in clauses) < n_rules:
            quantified = rng.random() < config.quantified_rule_probability
            body_size = int(rng.integers(1, 3))
            body = []
            for k in range(body_size):
                lit_var = quantified and (k == 0 or rng.random() < 0.5)
                body.append(
                    Literal(
                        _random_rule_atom(rng, entities, attrs, verbs, lit_var),
                        rng.random() < config.naf_body_probability,
                    )
                )
            head = _random_rule_atom(rng, entities, attrs, verbs, quantified and rng.random() < 0.8)
            body_vars = {t.name for lit in body for t in lit.atom.variables}
            if {t.name for t in head.variables} - body_vars:
                continue
            if any(lit.atom == head for lit in body):
                continue
            clauses.append(Rule(head, tuple(body), head_first=not _rule_has_var(head, body) and rng.random() < 0.25))

        seen: set[str] = set()
        unique: list[Clause] = []
        for c in clauses:
            key = repr(c) if isinstance(c, Atom) else repr((c.head, c.body))
            if key not in seen:
                seen.add(key)
                unique.append(c)
        order = rng.permutation(len(unique))
        theory = theory_from_clauses([unique[i] for i in order])
        try:
            stratify(theory)
        except NonStratifiedError:
            continue
        return theory
    raise GenerationExhausted("could not sample a stratified theory")


def _rule_has_var(head: Atom, body: list[Literal]) -> bool:
    return bool(head.variables) or any(lit.atom.variables for lit in body)


def _candidate_atoms(theory: Theory) -> list[Atom]:
    """All lexicon-shaped ground atoms over the theory's own vocabulary."""
    consts = theory.constants()
    arity: dict[str, int] = {}
    for s in theory.sentences:
        atoms = [s.clause] if isinstance(s.clause, Atom) else [s.clause.head] + [l.atom for l in s.clause.body]
        for a in atoms:
            arity[a.predicate] = len(a.args)
    out = []
    for pred in sorted(arity):
        if arity[pred] == 1:
            out.extend(Atom(pred, (const(c),)) for c in sorted(consts))
        elif arity[pred] == 2:
            out.extend(
                Atom(pred, (const(c1), const(c2))) for c1 in sorted(consts) for c2 in sorted(consts)
            )
    return out


def generate_sample(theory: Theory, target_depth: int, rng: np.random.Generator,
                    target_label: bool | None = None) -> Sample:
    """Draw a query hitting the requested depth bucket.

    Label-true queries have extract_proof depth == target_depth; negatives
    land in the bucket through their failed-exploration depth, which keeps
    negatives off the trivial length-0 pile for deep buckets. Raises
    NoQueryFound when the theory has no matching query.
    """
    label = bool(rng.random() < 0.5) if target_label is None else bool(target_label)
    want_naf = bool(rng.random() < NAF_QUERY_RATE)
    model = evaluate(theory)
    grounded = _ground_rules(theory, ())
    present = sorted(model.true_atoms, key=repr)
    absent = [a for a in _candidate_atoms(theory) if a not in model.true_atoms]

    proof_cache: dict[Atom, object] = {}

    def proof_of(atom: Atom):
        # candidate atoms only mention theory constants, so the grounding
        # domain matches extract_proof's and the results are identical
        if atom not in proof_cache:
            if atom in model.true_atoms:
                proof_cache[atom] = _positive_proof(theory, atom, model, grounded)
            else:
                proof_cache[atom] = _failed_exploration(theory, atom, grounded)
        return proof_cache[atom]

    def proof_ok(q: Query) -> bool:
        info = proof_of(q.atom)
        if info.depth != target_depth:
            return False
        return info.length == 0 or info.depth <= info.length

    naf_pool = [Query(Literal(a, True)) for a in (absent if label else present)]
    pos_pool = [Query(Literal(a, False)) for a in (present if label else absent)]
    pools = [naf_pool, pos_pool] if want_naf else [pos_pool, naf_pool]
    for pool in pools:
        matching = [q for q in pool if proof_ok(q)]
        if matching:
            query = matching[int(rng.integers(len(matching)))]
            info = extract_proof(theory, query)
            got = entails(theory, query)
            if got != label:  # never assert labels by construction
                continue
            return Sample(
                query=query,
                theory=theory,
                label=got,
                proof_depth=info.depth,
                proof_length=info.length,
                nl_query=realize_query(query),
                nl_context=realize_context(theory),
            )
    raise NoQueryFound(f"no query at depth {target_depth} with label {label}")


def generate_dataset(config: GenConfig, split: str = "train") -> Dataset:
    """n_samples samples balanced across (depth, label) buckets."""
    depths = list(config.depth_range)
    samples: list[Sample] = []
    ids: list[str] = []
    for i in range(config.n_samples):
        target_depth = depths[i % len(depths)]
        target_label = ((i // len(depths)) % 2) == 0
        rng = rng_for(config.rng_seed, "gen", split, i)
        sample = None
        for _ in range(_MAX_THEORY_ATTEMPTS):
            theory = generate_theory(config, rng)
            try:
                sample = generate_sample(theory, target_depth, rng, target_label)
                break
            except NoQueryFound:
                continue
        if sample is None:
            raise GenerationExhausted(
                f"no sample for bucket depth={target_depth} label={target_label} at index {i}"
            )
        samples.append(sample)
        ids.append(f"{split}-{i:06d}")
    provenance = (
        ("rng_seed", str(config.rng_seed)),
        ("template_table_version", DEFAULT_TABLE.version),
        ("lexicon_version", DEFAULT_TABLE.lexicon.version),
    )
    return Dataset(tuple(samples), tuple(ids), split, provenance)


def config_as_dict(config: GenConfig) -> dict:
    out = asdict(config)
    out["depth_range"] = list(config.depth_range)
    out["facts_per_theory"] = list(config.facts_per_theory)
    out["rules_per_theory"] = list(config.rules_per_theory)
    return out
