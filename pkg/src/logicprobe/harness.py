"""Attack loop: sample perturbations, score them, aggregate a report.

Each input gets ``samples_per_input`` independent perturbation draws and
keeps the strongest one.  Draw j of input i always uses the rng derived
from (seed, "attack", i, j), so a run with a larger budget replays the
smaller run's draws exactly and can only improve on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .generate import Dataset
from .metrics import f1_sentence_overlap
from .perturb import AttackOutcome, PerturbConfig, apply_set
from .policy import Policy, compute_params, sample_perturbation
from .seeding import rng_for
from .victims import Victim

LENGTH_BUCKETS = ("0", "1", "2", ">=3")


@dataclass(frozen=True)
class AttackRunConfig:
    rng_seed: int = 0
    samples_per_input: int = 1
    perturb: PerturbConfig = field(default_factory=PerturbConfig)

    def __post_init__(self) -> None:
        if self.samples_per_input < 1:
            raise ValueError("samples_per_input must be at least 1")


@dataclass(frozen=True)
class RunReport:
    policy_name: str
    victim_name: str
    n_inputs: int
    samples_per_input: int
    asr: float
    f1_mean: float
    solver_failure_rate: float
    asr_by_proof_length: dict[str, float | None]
    asr_by_proof_depth: dict[str, float | None]
    strategy_usage: dict[str, float]

    def as_dict(self) -> dict:
        return {
            "policy": self.policy_name,
            "victim": self.victim_name,
            "n_inputs": self.n_inputs,
            "samples_per_input": self.samples_per_input,
            "asr": self.asr,
            "f1_mean": self.f1_mean,
            "solver_failure_rate": self.solver_failure_rate,
            "asr_by_proof_length": self.asr_by_proof_length,
            "asr_by_proof_depth": self.asr_by_proof_depth,
            "strategy_usage": self.strategy_usage,
        }


def attack_strength(outcome: AttackOutcome) -> float:
    """Victim probability mass on the wrong side of the recomputed label."""
    if outcome.victim_prob_true is None:
        raise ValueError("outcome has no victim score")
    wanted = not outcome.perturbed.label
    return outcome.victim_prob_true if wanted else 1.0 - outcome.victim_prob_true


def _retention_key(outcome: AttackOutcome) -> tuple[bool, bool, float]:
    # ties keep the first draw, which makes best-of-k monotone in k
    return (outcome.success, not outcome.solver_failed, attack_strength(outcome))


def attack_one(
    sample,
    sample_id: str,
    index: int,
    policy: Policy,
    victim: Victim,
    config: AttackRunConfig,
) -> AttackOutcome:
    """Best-of-k perturbation draws against one input."""
    params = compute_params(policy, sample)
    best: AttackOutcome | None = None
    best_key = None
    for j in range(config.samples_per_input):
        rng = rng_for(config.rng_seed, "attack", index, j)
        pset = sample_perturbation(params, config.perturb, rng)
        outcome = apply_set(sample, pset, config.perturb, original_id=sample_id)
        score = victim.score(outcome.perturbed.nl_query, outcome.perturbed.nl_context)
        judged = outcome.with_victim(score)
        key = _retention_key(judged)
        if best_key is None or key > best_key:
            best, best_key = judged, key
    assert best is not None
    return best


def _length_bucket(length: int) -> str:
    return str(length) if length < 3 else ">=3"


def _bucketed_asr(outcomes: list[AttackOutcome], key) -> dict[str, float | None]:
    table: dict[str, list[bool]] = {b: [] for b in LENGTH_BUCKETS}
    for outcome in outcomes:
        table[_length_bucket(key(outcome))].append(outcome.success)
    return {
        bucket: (sum(wins) / len(wins) if wins else None)
        for bucket, wins in table.items()
    }


def stratified_asr(outcomes: list[AttackOutcome], by: str = "length") -> dict[str, float | None]:
    """Attack success rate split by the original proof annotation.

    Buckets 0, 1, 2 and >=3; a bucket with no inputs reports None rather
    than pretending to a rate.
    """
    if by == "length":
        return _bucketed_asr(outcomes, lambda o: o.original_proof_length)
    if by == "depth":
        return _bucketed_asr(outcomes, lambda o: o.original_proof_depth)
    raise ValueError(f"unknown stratification {by!r}")


def _pair_f1(sample, outcome: AttackOutcome) -> float:
    original = (sample.nl_query, *sample.nl_context)
    perturbed = (outcome.perturbed.nl_query, *outcome.perturbed.nl_context)
    return f1_sentence_overlap(original, perturbed)


def run_attack(
    policy: Policy,
    dataset: Dataset,
    victim: Victim,
    config: AttackRunConfig,
) -> tuple[RunReport, list[AttackOutcome]]:
    """Attack every input in the dataset and summarize."""
    outcomes: list[AttackOutcome] = []
    f1_values: list[float] = []
    for i, (sample, sample_id) in enumerate(zip(dataset.samples, dataset.ids)):
        best = attack_one(sample, sample_id, i, policy, victim, config)
        outcomes.append(best)
        f1_values.append(_pair_f1(sample, best))

    n = len(outcomes)
    wins = sum(o.success for o in outcomes)
    failures = sum(o.solver_failed for o in outcomes)
    usage = {
        "ques_flip_rate": _safe_mean([float(o.perturbation.ques_flip) for o in outcomes]),
        "mean_sent_elim": _safe_mean([float(len(o.perturbation.sent_elim)) for o in outcomes]),
        "mean_equiv_sub": _safe_mean([float(len(o.perturbation.equiv_sub)) for o in outcomes]),
        "identity_rate": _safe_mean([float(o.perturbation.is_identity) for o in outcomes]),
    }
    report = RunReport(
        policy_name=getattr(policy, "name", type(policy).__name__),
        victim_name=victim.name,
        n_inputs=n,
        samples_per_input=config.samples_per_input,
        asr=wins / n if n else 0.0,
        f1_mean=_safe_mean(f1_values),
        solver_failure_rate=failures / n if n else 0.0,
        asr_by_proof_length=stratified_asr(outcomes, "length"),
        asr_by_proof_depth=stratified_asr(outcomes, "depth"),
        strategy_usage=usage,
    )
    return report, outcomes


def _safe_mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def transferability(outcomes: list[AttackOutcome], victim: Victim) -> float | None:
    """Fraction of successful attacks that also fool another victim.

    Returns None when there are no successes to transfer.
    """
    successes = [o for o in outcomes if o.success]
    if not successes:
        return None
    carried = 0
    for outcome in successes:
        score = victim.score(outcome.perturbed.nl_query, outcome.perturbed.nl_context)
        if (score >= 0.5) != outcome.perturbed.label:
            carried += 1
    return carried / len(successes)


def export_rows(outcomes: list[AttackOutcome], split: str) -> list[dict]:
    """Dataset rows for the successful, solver-clean perturbed samples.

    Ids get an ``-adv`` suffix; repeated original ids keep the first
    outcome only, so merged outcome lists stay unambiguous.
    """
    from .io import sample_to_row

    rows = []
    seen: set[str] = set()
    for outcome in outcomes:
        if not outcome.success or outcome.solver_failed:
            continue
        if outcome.original_id in seen:
            continue
        seen.add(outcome.original_id)
        rows.append(sample_to_row(f"{outcome.original_id}-adv", outcome.perturbed, split))
    return rows
