"""Label-consistent perturbation operators over generated samples.

Three operators compose into a perturbation set:

* question flip: toggle the negation-as-failure marker on the query,
* sentence elimination: drop whole sentences from the context,
* equivalence substitution: replace a fact with a rule that rederives it
  from other facts already present.

Applying a set rewrites the context and query, then recomputes the gold
label once with the solver, so the perturbed sample is consistent by
construction.  The only escape hatch is a context that leaves stratified
logic after substitution; that is reported as a solver failure rather
than papered over.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InsufficientFacts, NonStratifiedError
from .logic import (
    Atom,
    Literal,
    Rule,
    Sample,
    Sentence,
    Theory,
    entails,
    extract_proof,
    stratify,
)
from .nl import DEFAULT_TABLE, TemplateTable, negate_query, realize_clause


@dataclass(frozen=True)
class PerturbConfig:
    """Budget for one perturbation set."""

    max_sent_elim: int = 3
    max_equiv_sub: int = 3
    equiv_sub_body_size: int = 2

    def __post_init__(self) -> None:
        if self.max_sent_elim < 0 or self.max_equiv_sub < 0:
            raise ValueError("caps must be non-negative")
        if self.equiv_sub_body_size < 1:
            raise ValueError("equiv_sub_body_size must be at least 1")


@dataclass(frozen=True)
class PerturbationSet:
    """One concrete choice of edits, plus the log-probability of drawing it.

    ``equiv_sub`` maps target fact ids to the body fact ids of the
    replacement rule; targets and eliminated ids are disjoint.
    """

    ques_flip: bool = False
    sent_elim: frozenset[int] = frozenset()
    equiv_sub: tuple[tuple[int, tuple[int, ...]], ...] = ()
    log_prob: float = 0.0

    @property
    def equiv_sub_targets(self) -> frozenset[int]:
        return frozenset(sid for sid, _ in self.equiv_sub)

    @property
    def is_identity(self) -> bool:
        return not self.ques_flip and not self.sent_elim and not self.equiv_sub

    def size(self) -> int:
        return int(self.ques_flip) + len(self.sent_elim) + len(self.equiv_sub)


@dataclass(frozen=True)
class AttackOutcome:
    """Result of applying one perturbation set to one sample.

    ``victim_prob_true`` and ``success`` are filled in by the harness
    once a victim has scored the perturbed sample; straight out of
    ``apply_set`` they hold ``None`` and ``False``.
    """

    original_id: str
    perturbed: Sample
    perturbation: PerturbationSet
    original_label: bool
    original_proof_depth: int
    original_proof_length: int
    solver_failed: bool
    consistent: bool = True
    victim_prob_true: float | None = None
    success: bool = False

    def with_victim(self, prob_true: float) -> "AttackOutcome":
        """Attach a victim score and judge the attack.

        Success means the victim's thresholded prediction disagrees with
        the recomputed gold label; a solver failure never counts.
        """
        predicted = prob_true >= 0.5
        won = (not self.solver_failed) and (predicted != self.perturbed.label)
        return replace(self, victim_prob_true=prob_true, success=won)


def _validate_set(sample: Sample, pset: PerturbationSet, config: PerturbConfig) -> None:
    if len(pset.sent_elim) > config.max_sent_elim:
        raise ValueError("sentence elimination exceeds cap")
    if len(pset.equiv_sub) > config.max_equiv_sub:
        raise ValueError("equivalence substitution exceeds cap")
    sids = set(sample.theory.sentence_ids)
    fact_sids = {sid for sid, _ in sample.theory.facts}
    if not pset.sent_elim <= sids:
        raise ValueError("eliminated ids not in theory")
    targets = pset.equiv_sub_targets
    if len(targets) != len(pset.equiv_sub):
        raise ValueError("duplicate substitution target")
    if targets & pset.sent_elim:
        raise ValueError("substitution targets overlap eliminated ids")
    for sid, body in pset.equiv_sub:
        if sid not in fact_sids:
            raise ValueError(f"substitution target {sid} is not a fact")
        if not body:
            raise InsufficientFacts("substitution rule needs a non-empty body")
        for bid in body:
            if bid not in fact_sids:
                raise InsufficientFacts(f"body id {bid} is not a fact")
            if bid in targets or bid in pset.sent_elim:
                raise InsufficientFacts("body facts must survive the perturbation")


def apply_ques_flip(sample: Sample, table: TemplateTable = DEFAULT_TABLE) -> Sample:
    """Toggle the query's negation-as-failure marker.

    Under the closed-world assumption the gold label is exactly
    complemented, and the proof metadata is untouched: the underlying
    atom, hence the derivation or failed exploration, is the same.
    """
    nl_query, flipped = negate_query(sample.nl_query, sample.query, table)
    return replace(
        sample,
        query=flipped,
        label=not sample.label,
        nl_query=nl_query,
    )


def apply_sent_elim(
    sample: Sample, sids: frozenset[int], table: TemplateTable = DEFAULT_TABLE
) -> Sample:
    """Drop the given sentences and recompute label and proof metadata."""
    del table
    missing = sids - set(sample.theory.sentence_ids)
    if missing:
        raise ValueError(f"unknown sentence ids {sorted(missing)}")
    kept = [s for s in sample.theory.sentences if s.sid not in sids]
    kept_nl = [
        line
        for line, s in zip(sample.nl_context, sample.theory.sentences)
        if s.sid not in sids
    ]
    theory = Theory(tuple(kept))
    # Deleting sentences only removes dependency edges; stratification survives.
    label = entails(theory, sample.query)
    proof = extract_proof(theory, sample.query)
    return replace(
        sample,
        theory=theory,
        label=label,
        proof_depth=proof.depth,
        proof_length=proof.length,
        nl_context=tuple(kept_nl),
    )


def apply_equiv_sub(
    sample: Sample,
    target_sid: int,
    body_sids: tuple[int, ...],
    table: TemplateTable = DEFAULT_TABLE,
) -> Sample:
    """Replace one fact with a ground rule deriving it from other facts.

    The rule's body is the conjunction of the given facts, so the target
    stays derivable and the gold label is preserved whenever the solver
    still accepts the program.
    """
    pset = PerturbationSet(equiv_sub=((target_sid, tuple(body_sids)),))
    _validate_set(sample, pset, PerturbConfig(max_equiv_sub=1, equiv_sub_body_size=len(body_sids)))
    outcome = apply_set(sample, pset, PerturbConfig(), table)
    if outcome.solver_failed:
        stratify(outcome.perturbed.theory)  # raises with the offending cycle
    return outcome.perturbed


def apply_set(
    sample: Sample,
    pset: PerturbationSet,
    config: PerturbConfig | None = None,
    table: TemplateTable = DEFAULT_TABLE,
    original_id: str = "",
) -> AttackOutcome:
    """Apply a whole perturbation set and recompute the label once.

    Substitutions run first in ascending target id, then eliminations,
    then the question flip; the composite is insensitive to any other
    ordering because the three operators touch disjoint sentences.
    """
    config = config or PerturbConfig()
    _validate_set(sample, pset, config)

    atom_by_sid: dict[int, Atom] = {sid: atom for sid, atom in sample.theory.facts}
    sentences = list(sample.theory.sentences)
    nl_lines = list(sample.nl_context)
    next_sid = max(sample.theory.sentence_ids, default=-1) + 1

    for target_sid, body_sids in sorted(pset.equiv_sub):
        head = atom_by_sid[target_sid]
        body = tuple(Literal(atom_by_sid[bid]) for bid in body_sids)
        rule = Rule(head, body)
        keep = [i for i, s in enumerate(sentences) if s.sid != target_sid]
        sentences = [sentences[i] for i in keep]
        nl_lines = [nl_lines[i] for i in keep]
        sentences.append(Sentence(next_sid, rule))
        nl_lines.append(realize_clause(rule, table))
        next_sid += 1

    if pset.sent_elim:
        keep = [i for i, s in enumerate(sentences) if s.sid not in pset.sent_elim]
        sentences = [sentences[i] for i in keep]
        nl_lines = [nl_lines[i] for i in keep]

    theory = Theory(tuple(sentences))
    query = sample.query
    nl_query = sample.nl_query
    if pset.ques_flip:
        nl_query, query = negate_query(nl_query, query, table)

    solver_failed = False
    try:
        label = entails(theory, query)
        proof = extract_proof(theory, query)
        depth, length = proof.depth, proof.length
    except NonStratifiedError:
        # Keep the original annotations as placeholders; the outcome is
        # flagged and can never count as a successful attack.
        solver_failed = True
        label = sample.label
        depth, length = sample.proof_depth, sample.proof_length

    perturbed = replace(
        sample,
        theory=theory,
        query=query,
        label=label,
        proof_depth=depth,
        proof_length=length,
        nl_query=nl_query,
        nl_context=tuple(nl_lines),
    )
    return AttackOutcome(
        original_id=original_id,
        perturbed=perturbed,
        perturbation=pset,
        original_label=sample.label,
        original_proof_depth=sample.proof_depth,
        original_proof_length=sample.proof_length,
        solver_failed=solver_failed,
    )
