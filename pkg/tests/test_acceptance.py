"""Acceptance gate: each headline guarantee as one timed test.

Every test prints a single PASS/FAIL line (bypassing capture, so it
shows up in plain pytest output) and enforces both the property and its
runtime budget."""

import itertools
import json
import time

import numpy as np
import pytest
from conftest import emit_verdict

from logicprobe import (
    GenConfig,
    LearnedPolicy,
    NonStratifiedError,
    PerturbConfig,
    PerturbationSet,
    PolicyParameters,
    RandomSelector,
    TrainConfig,
    UnigramSelector,
    attack_signal,
    generate_dataset,
    train,
)
from logicprobe import cli
from logicprobe.generate import generate_theory
from logicprobe.harness import (
    AttackRunConfig,
    run_attack,
    stratified_asr,
    transferability,
)
from logicprobe.logic import (
    Atom,
    Literal,
    Query,
    const,
    entails,
    evaluate,
    naive_fixpoint_oracle,
)
from logicprobe.metrics import rouge1
from logicprobe.perturb import (
    AttackOutcome,
    apply_equiv_sub,
    apply_ques_flip,
    apply_set,
)
from logicprobe.policy import batch_log_prob_grad, compute_params, sample_perturbation
from logicprobe.seeding import rng_for
from logicprobe.victims import DepthLimitedVictim, OracleVictim


def announce(name: str, ok: bool, detail: str, elapsed: float, budget: float) -> None:
    status = "PASS" if (ok and elapsed < budget) else "FAIL"
    emit_verdict(f"[{status}] {name}: {detail} ({elapsed:.1f}s of {budget:.0f}s budget)")
    assert ok, f"{name}: {detail}"
    assert elapsed < budget, f"{name}: budget exceeded at {elapsed:.1f}s"


@pytest.fixture(scope="module")
def corpus2000():
    return generate_dataset(GenConfig(rng_seed=211, n_samples=2000), "acc")


@pytest.fixture(scope="module")
def val500():
    return generate_dataset(GenConfig(rng_seed=402, n_samples=500), "val")


def test_solver_oracle_equivalence():
    # 1,000 random stratified theories with at most 12 ground atoms:
    # the semi-naive evaluator and the naive full-pass oracle agree.
    cfg = GenConfig(rng_seed=101, facts_per_theory=(2, 4), rules_per_theory=(2, 4))
    rng = rng_for(101, "acc", "oracle")
    start = time.perf_counter()
    kept = agree = 0
    while kept < 1000:
        theory = generate_theory(cfg, rng)
        if len(theory.predicates()) * len(theory.constants()) > 12:
            continue
        kept += 1
        fast = evaluate(theory)
        slow = naive_fixpoint_oracle(theory)
        agree += fast.true_atoms == slow.true_atoms and fast.strata == slow.strata
    elapsed = time.perf_counter() - start
    announce(
        "solver oracle equivalence", agree == 1000, f"{agree}/1000 theories agree", elapsed, 30
    )


def test_cwa_complement():
    # 10,000 (theory, ground atom) pairs: exactly one of a / not a holds.
    ds = generate_dataset(GenConfig(rng_seed=102, n_samples=700), "cwa")
    start = time.perf_counter()
    pairs = holds = 0
    for sample in ds.samples:
        for predicate in sample.theory.predicates():
            for name in sample.theory.constants():
                atom = Atom(predicate, (const(name),))
                positive = entails(sample.theory, Query(Literal(atom, False)))
                negative = entails(sample.theory, Query(Literal(atom, True)))
                pairs += 1
                holds += positive != negative
                if pairs == 10_000:
                    break
            if pairs == 10_000:
                break
        if pairs == 10_000:
            break
    elapsed = time.perf_counter() - start
    announce(
        "closed-world complement", pairs == 10_000 and holds == pairs,
        f"{holds}/{pairs} pairs complement", elapsed, 30,
    )


def test_consistency_by_construction(corpus2000):
    # every non-failed outcome of a 2,000-sample random attack carries a
    # label that a fresh solver call reproduces; failures stay rare.
    start = time.perf_counter()
    report, outcomes = run_attack(
        RandomSelector(), corpus2000, DepthLimitedVictim(1), AttackRunConfig(rng_seed=33)
    )
    consistent = sum(
        o.solver_failed or entails(o.perturbed.theory, o.perturbed.query) == o.perturbed.label
        for o in outcomes
    )
    elapsed = time.perf_counter() - start
    ok = consistent == len(outcomes) and report.solver_failure_rate < 0.05
    announce(
        "consistency by construction", ok,
        f"{consistent}/{len(outcomes)} recomputed labels match, "
        f"solver failure rate {report.solver_failure_rate:.3f} < 0.05",
        elapsed, 120,
    )


def test_isolation_laws(corpus2000):
    # the flip alone complements every label; substitution alone never
    # moves a label the solver still accepts.
    start = time.perf_counter()
    flips = flip_ok = 0
    subs = sub_ok = sub_failed = 0
    for sample in corpus2000.samples:
        flipped = apply_ques_flip(sample)
        flips += 1
        flip_ok += (
            flipped.label == (not sample.label)
            and entails(flipped.theory, flipped.query) == flipped.label
        )
        facts = [sid for sid, _ in sample.theory.facts]
        if len(facts) < 2:
            continue
        subs += 1
        try:
            perturbed = apply_equiv_sub(sample, facts[0], (facts[1],))
        except NonStratifiedError:
            sub_failed += 1
            continue
        sub_ok += perturbed.label == sample.label
    elapsed = time.perf_counter() - start
    ok = flip_ok == flips and sub_ok == subs - sub_failed
    announce(
        "isolation laws", ok,
        f"flip complements {flip_ok}/{flips}, substitution preserves "
        f"{sub_ok}/{subs - sub_failed} non-failed (of {subs})",
        elapsed, 120,
    )


def test_length_zero_shield():
    # proofs of length 0 mean nothing unifies with the query: no mix of
    # eliminations and substitutions can change that label.
    cfg = PerturbConfig()
    pool = generate_dataset(
        GenConfig(rng_seed=505, n_samples=1600, facts_per_theory=(2, 3), rules_per_theory=(1, 3)),
        "shield",
    )
    zero = [
        s for s in pool.samples if s.proof_length == 0 and len(s.theory.sentences) <= 6
    ][:200]
    assert len(zero) == 200
    start = time.perf_counter()
    total = unchanged = failed = 0
    for sample in zero:
        sids = [s.sid for s in sample.theory.sentences]
        fact_sids = [sid for sid, _ in sample.theory.facts]
        for n_elim in range(0, cfg.max_sent_elim + 1):
            for elim in itertools.combinations(sids, n_elim):
                elim_set = frozenset(elim)
                alive = [f for f in fact_sids if f not in elim_set]
                for n_sub in range(0, min(cfg.max_equiv_sub, len(alive)) + 1):
                    for targets in itertools.combinations(alive, n_sub):
                        candidates = [f for f in alive if f not in targets]
                        if n_sub and not candidates:
                            continue
                        if n_sub:
                            bodies = [
                                c
                                for size in range(1, min(cfg.equiv_sub_body_size, len(candidates)) + 1)
                                for c in itertools.combinations(candidates, size)
                            ]
                            assignments = itertools.product(bodies, repeat=n_sub)
                        else:
                            assignments = [()]
                        for assignment in assignments:
                            pset = PerturbationSet(
                                ques_flip=False,
                                sent_elim=elim_set,
                                equiv_sub=tuple(
                                    sorted(
                                        (t, tuple(sorted(b)))
                                        for t, b in zip(targets, assignment)
                                    )
                                ),
                            )
                            outcome = apply_set(sample, pset, cfg)
                            total += 1
                            if outcome.solver_failed:
                                failed += 1
                            else:
                                unchanged += outcome.perturbed.label == sample.label
    elapsed = time.perf_counter() - start
    ok = unchanged == total - failed
    announce(
        "length-0 shield", ok,
        f"{unchanged}/{total - failed} non-failed sets preserve the label "
        f"over {total} enumerated sets on 200 inputs",
        elapsed, 120,
    )


def _enumerate_exact(theta, sample, cfg, signal_of):
    """Exact expected score-function gradient by branch enumeration."""
    cat = compute_params(LearnedPolicy(theta), sample)
    sids = list(cat.sentence_ids)
    mu_elim = dict(zip(sids, cat.mu_sent_elim))
    mu_sub = dict(zip(sids, cat.mu_equiv_sub))
    fact_sids = [sid for sid, f in zip(sids, cat.fact_mask) if f]
    branches = []
    for elim_bits in itertools.product((0, 1), repeat=len(sids)):
        p_elim = 1.0
        elim_raw = []
        for sid, bit in zip(sids, elim_bits):
            p_elim *= mu_elim[sid] if bit else 1 - mu_elim[sid]
            if bit:
                elim_raw.append(sid)
        for sub_bits in itertools.product((0, 1), repeat=len(fact_sids)):
            p_sub = 1.0
            sub_raw = []
            for sid, bit in zip(fact_sids, sub_bits):
                p_sub *= mu_sub[sid] if bit else 1 - mu_sub[sid]
                if bit:
                    sub_raw.append(sid)
            sub_set = frozenset(sub_raw)
            elim_set = frozenset(s for s in elim_raw if s not in sub_set)
            candidates = sorted(set(fact_sids) - sub_set - elim_set)
            for flip in (False, True):
                p = p_elim * p_sub * (cat.mu_ques_flip if flip else 1 - cat.mu_ques_flip)
                if not sub_set or not candidates:
                    # all targets drop together: the candidate pool is shared
                    branches.append((p, PerturbationSet(flip, elim_set, ())))
                    continue
                size = min(cfg.equiv_sub_body_size, len(candidates))
                combos = list(itertools.combinations(candidates, size))
                share = 1.0 / len(combos)
                targets = sorted(sub_set)
                for assignment in itertools.product(combos, repeat=len(targets)):
                    subs = tuple(
                        sorted((t, tuple(sorted(b))) for t, b in zip(targets, assignment))
                    )
                    branches.append(
                        (p * share ** len(targets), PerturbationSet(flip, elim_set, subs))
                    )
    mass = sum(p for p, _ in branches)
    assert abs(mass - 1.0) < 1e-9
    dim = theta.flatten().size
    rewards, grads = {}, {}
    mean_reward = 0.0
    for p, pset in branches:
        key = (pset.ques_flip, pset.sent_elim, pset.equiv_sub)
        if key not in rewards:
            rewards[key] = signal_of(sample, pset)
            grads[key] = batch_log_prob_grad(theta, sample, pset)
        mean_reward += p * rewards[key]
    exact = np.zeros(dim)
    for p, pset in branches:
        key = (pset.ques_flip, pset.sent_elim, pset.equiv_sub)
        exact += p * (rewards[key] - mean_reward) * grads[key]
    return cat, exact, mean_reward


def test_reinforce_estimator():
    # the Monte-Carlo score-function gradient is unbiased: its mean over
    # 10^4 draws matches the exactly enumerated expected gradient.
    # Budgets exceed the sentence count, so trimming never engages and
    # the enumeration covers the sampler's full branch structure
    # (substitution-wins overlaps and the shared-pool body drops).
    cfg = PerturbConfig(max_sent_elim=6, max_equiv_sub=6, equiv_sub_body_size=2)
    victim = DepthLimitedVictim(0)

    def signal_of(sample, pset):
        outcome = apply_set(sample, pset, cfg)
        score = victim.score(outcome.perturbed.nl_query, outcome.perturbed.nl_context)
        return attack_signal(outcome.with_victim(score))

    pool = generate_dataset(
        GenConfig(
            rng_seed=303, n_samples=200, depth_range=(0,),
            facts_per_theory=(2, 3), rules_per_theory=(1, 2),
        ),
        "est",
    )
    samples = [s for s in pool.samples if len(s.theory.sentences) <= 4][:20]
    assert len(samples) == 20
    theta = PolicyParameters.zeros(hidden_size=4)
    dim = theta.flatten().size

    start = time.perf_counter()
    exact = np.zeros(dim)
    cats, baselines = [], []
    for sample in samples:
        cat, gradient, mean_reward = _enumerate_exact(theta, sample, cfg, signal_of)
        cats.append(cat)
        baselines.append(mean_reward)  # constant baselines keep the mean unchanged
        exact += gradient / len(samples)

    reps = 10_000
    mc = np.zeros(dim)
    for rep in range(reps):
        batch = np.zeros(dim)
        for i, sample in enumerate(samples):
            rng = rng_for(909, "mc", rep, i)
            pset = sample_perturbation(cats[i], cfg, rng)
            batch += (signal_of(sample, pset) - baselines[i]) * batch_log_prob_grad(
                theta, sample, pset
            )
        mc += batch / len(samples)
    mc /= reps
    elapsed = time.perf_counter() - start

    big = np.abs(exact) >= 1e-6
    rel_ok = np.all(np.abs(mc - exact)[big] <= 0.05 * np.abs(exact)[big])
    abs_ok = np.all(np.abs(mc - exact)[~big] <= 1e-4)
    worst = float(np.max(np.abs(mc - exact)[big] / np.abs(exact)[big]))
    announce(
        "score-function estimator", rel_ok and abs_ok and big.sum() >= 3,
        f"{int(big.sum())} live coords within 5% (worst {worst:.3f}), "
        f"{int((~big).sum())} near-zero coords within 1e-4",
        elapsed, 300,
    )


def test_learning_beats_random(val500):
    # five REINFORCE epochs against the shallow reasoner lift validation
    # attack success at least five points over the random selector.
    train_ds = generate_dataset(GenConfig(rng_seed=401, n_samples=5000), "train")
    victim = DepthLimitedVictim(1)
    start = time.perf_counter()
    baseline, _ = run_attack(RandomSelector(), val500, victim, AttackRunConfig(rng_seed=77))
    result = train(
        PolicyParameters.zeros(hidden_size=16),
        train_ds.samples,
        victim,
        TrainConfig(rng_seed=5, epochs=5, batch_size=16, learning_rate=0.05),
        val500.samples,
    )
    elapsed = time.perf_counter() - start
    gain = result.best_val_asr - baseline.asr
    announce(
        "learning beats random", gain >= 0.05,
        f"learned {result.best_val_asr:.3f} vs random {baseline.asr:.3f} (+{gain:.3f})",
        elapsed, 900,
    )


def test_best_of_k_monotone(val500):
    # prefix draws make the retained outcome only improve with more
    # tries, and sixteen tries beat one strictly.
    victim = DepthLimitedVictim(1)
    start = time.perf_counter()
    asr = {}
    for k in (1, 2, 4, 8, 16):
        report, _ = run_attack(
            RandomSelector(), val500, victim, AttackRunConfig(rng_seed=88, samples_per_input=k)
        )
        asr[k] = report.asr
    elapsed = time.perf_counter() - start
    ks = sorted(asr)
    monotone = all(asr[a] <= asr[b] for a, b in zip(ks, ks[1:]))
    announce(
        "best-of-k decoding", monotone and asr[16] > asr[1],
        "nondecreasing " + " <= ".join(f"{asr[k]:.3f}" for k in ks),
        elapsed, 600,
    )


def test_oracle_unfoolability(val500):
    # a consistent perturbation can never fool the solver itself, under
    # any policy; successes elsewhere never transfer to it.
    oracle = OracleVictim()
    policies = {
        "random": RandomSelector(),
        "unigram": UnigramSelector.fit(val500.samples),
        "learned": LearnedPolicy(PolicyParameters.zeros(hidden_size=16)),
    }
    start = time.perf_counter()
    rates = {}
    for name, policy in policies.items():
        report, _ = run_attack(policy, val500, oracle, AttackRunConfig(rng_seed=44))
        rates[name] = report.asr
    _, outcomes = run_attack(
        RandomSelector(), val500, DepthLimitedVictim(1),
        AttackRunConfig(rng_seed=45, samples_per_input=4),
    )
    assert any(o.success for o in outcomes)
    transfer = transferability(outcomes, oracle)
    elapsed = time.perf_counter() - start
    ok = all(r == 0.0 for r in rates.values()) and transfer == 0.0
    announce(
        "oracle unfoolability", ok,
        f"attack rates {sorted(rates.values())}, transfer {transfer}",
        elapsed, 120,
    )


def test_metric_units():
    from logicprobe.metrics import f1_sentence_overlap

    start = time.perf_counter()
    checks = [
        rouge1("mark is smart", "mark is kind") == pytest.approx(2 / 3),
        rouge1("mark is smart", "mark is smart") == 1.0,
        rouge1("mark is smart", "beth was quiet") == 0.0,
        # drop one of four context sentences, query kept on both sides
        f1_sentence_overlap(("q", "a", "b", "c", "d"), ("q", "a", "b", "c"))
        == pytest.approx(8 / 9),
        # flip only the query over a four-sentence context
        f1_sentence_overlap(("q", "a", "b", "c", "d"), ("q'", "a", "b", "c", "d"))
        == pytest.approx(4 / 5),
    ]

    def fake(length, success):
        sample_bits = dict(
            original_label=True, original_proof_depth=length, original_proof_length=length,
            perturbation=PerturbationSet(), solver_failed=False, success=success,
        )
        ds = generate_dataset(GenConfig(rng_seed=1, n_samples=1), "fx")
        return AttackOutcome(original_id="fx", perturbed=ds.samples[0], **sample_bits)

    table = stratified_asr(
        [fake(0, True), fake(0, False), fake(2, True), fake(5, True), fake(7, False)],
        by="length",
    )
    checks.append(table == {"0": 0.5, "1": None, "2": 1.0, ">=3": 0.5})
    elapsed = time.perf_counter() - start
    announce(
        "metric fixtures", all(checks), f"{sum(checks)}/{len(checks)} fixtures exact", elapsed, 5
    )


def test_cli_reproducibility(tmp_path, monkeypatch):
    # identical seeded command lines yield byte-identical files end to
    # end: dataset, outcomes, report, checkpoint, log, and manifests.
    start = time.perf_counter()
    for sub in ("a", "b"):
        workdir = tmp_path / sub
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        assert cli.main(["generate", "--out", "d.jsonl", "--n-samples", "120", "--rng-seed", "13"]) == 0
        assert (
            cli.main(
                [
                    "attack", "--in", "d.jsonl", "--victim", "depth:1", "--rng-seed", "14",
                    "--samples-per-input", "2", "--outcomes", "o.jsonl", "--report", "r.json",
                ]
            )
            == 0
        )
        assert (
            cli.main(
                [
                    "train", "--in", "d.jsonl", "--victim", "depth:1", "--out", "c.json",
                    "--epochs", "1", "--batch-size", "16", "--rng-seed", "15",
                ]
            )
            == 0
        )
        assert cli.main(["export", "--outcomes", "o.jsonl", "--out", "adv.jsonl"]) == 0
    names = [
        "d.jsonl", "d.jsonl.manifest.json", "o.jsonl", "o.jsonl.manifest.json",
        "r.json", "r.json.manifest.json", "c.json", "c.json.log.csv",
        "c.json.manifest.json", "adv.jsonl", "adv.jsonl.manifest.json",
    ]
    identical = []
    for name in names:
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        identical.append(a == b)
    elapsed = time.perf_counter() - start
    announce(
        "seeded reruns byte-identical", all(identical),
        f"{sum(identical)}/{len(names)} artifacts identical", elapsed, 300,
    )
