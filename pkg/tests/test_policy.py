"""Policy layer: parameters, sampling distribution, gradients, training."""

import math

import numpy as np
import pytest

from logicprobe.errors import NonFiniteGradient
from logicprobe.generate import GenConfig, generate_dataset
from logicprobe.logic import Rule, Sample, entails, extract_proof, parse_program, parse_query_text
from logicprobe.metrics import rouge1
from logicprobe.nl import realize_context, realize_query
from logicprobe.perturb import PerturbConfig, PerturbationSet, apply_set
from logicprobe.policy import (
    FEATURE_DIM,
    MU_EPS,
    BaselineState,
    CategoricalParams,
    LearnedPolicy,
    PolicyParameters,
    RandomSelector,
    ReinforceStats,
    TrainConfig,
    UnigramSelector,
    attack_signal,
    batch_log_prob_grad,
    compute_features,
    compute_params,
    reinforce_step,
    sample_perturbation,
    set_log_prob,
    train,
)
from logicprobe.seeding import rng_for
from logicprobe.victims import DepthLimitedVictim


def make_sample(program: str, query: str) -> Sample:
    theory = parse_program(program)
    q = parse_query_text(query)
    info = extract_proof(theory, q)
    return Sample(
        query=q,
        theory=theory,
        label=entails(theory, q),
        proof_depth=info.depth,
        proof_length=info.length,
        nl_query=realize_query(q),
        nl_context=realize_context(theory),
    )


@pytest.fixture()
def small_sample():
    return make_sample(
        "smart(anne).\nbig(beth).\nkind(X) :- smart(X).",
        "kind(anne)",
    )


@pytest.fixture(scope="module")
def corpus():
    cfg = GenConfig(rng_seed=21, n_samples=12, depth_range=(0, 1))
    return generate_dataset(cfg, split="train").samples


# --- features ----------------------------------------------------------------

def test_feature_matrix_shape(small_sample):
    feats = compute_features(small_sample)
    assert feats.shape == (4, FEATURE_DIM)


def test_query_row_flags(small_sample):
    row = compute_features(small_sample)[0]
    assert row[3] == 1.0 and row[1] == 0.0 and row[2] == 0.0
    assert row[8] == 1.0
    assert row[0] == 1.0


def test_sentence_rows_distinguish_kinds(small_sample):
    feats = compute_features(small_sample)
    kinds = [(row[1], row[2]) for row in feats[1:]]
    assert kinds == [(1.0, 0.0), (1.0, 0.0), (0.0, 1.0)]


def test_naf_rule_feature():
    s = make_sample("smart(anne).\nkind(X) :- not smart(X).", "kind(beth)")
    feats = compute_features(s)
    assert feats[2][7] == 1.0


def test_overlap_feature_matches_metric(small_sample):
    feats = compute_features(small_sample)
    for row, line in zip(feats[1:], small_sample.nl_context):
        assert row[0] == pytest.approx(rouge1(small_sample.nl_query, line))


# --- parameter containers ------------------------------------------------------

def test_categorical_params_validation(small_sample):
    with pytest.raises(ValueError):
        CategoricalParams((0, 1), (True, True), (0.5,), (0.5, 0.5), 0.5)
    with pytest.raises(ValueError):
        CategoricalParams((0,), (True,), (0.0,), (0.5,), 0.5)
    with pytest.raises(ValueError):
        CategoricalParams((0,), (False,), (0.5,), (0.5,), 0.5)


def test_random_selector_is_uniform(small_sample):
    params = compute_params(RandomSelector(), small_sample)
    assert params.mu_sent_elim == (0.5, 0.5, 0.5)
    assert params.mu_equiv_sub == (0.5, 0.5, 0.0)
    assert params.mu_ques_flip == 0.5


def test_unigram_selector_tracks_overlap(corpus):
    sel = UnigramSelector.fit(corpus)
    assert 0.0 < sel.mean_overlap < 1.0
    sample = corpus[0]
    params = sel.compute_params(sample)
    overlaps = [rouge1(sample.nl_query, line) for line in sample.nl_context]
    order = np.argsort(overlaps)
    mus = np.array(params.mu_sent_elim)[order]
    assert all(a <= b + 1e-12 for a, b in zip(mus, mus[1:]))


def test_zero_learned_policy_outputs_half(small_sample):
    policy = LearnedPolicy(PolicyParameters.zeros(hidden_size=4))
    params = policy.compute_params(small_sample)
    assert params.mu_sent_elim == (0.5, 0.5, 0.5)
    assert params.mu_equiv_sub == (0.5, 0.5, 0.0)
    assert params.mu_ques_flip == 0.5


def test_learned_policy_stays_clamped(small_sample):
    big = PolicyParameters.random(rng_for(0, "big"), hidden_size=8, scale=30.0)
    params = LearnedPolicy(big).compute_params(small_sample)
    for mu in (*params.mu_sent_elim, params.mu_ques_flip):
        assert MU_EPS <= mu <= 1.0 - MU_EPS


def test_flatten_round_trip():
    params = PolicyParameters.random(rng_for(1, "flat"), hidden_size=3)
    theta = params.flatten()
    other = PolicyParameters.zeros(hidden_size=3)
    other.load_flat(theta)
    assert np.allclose(other.flatten(), theta)


def test_json_round_trip():
    params = PolicyParameters.random(rng_for(2, "json"), hidden_size=3)
    back = PolicyParameters.from_json(params.to_json())
    assert np.allclose(back.flatten(), params.flatten())


# --- sampling ------------------------------------------------------------------

def _fixed_params():
    # two facts then one rule
    return CategoricalParams(
        sentence_ids=(0, 1, 2),
        fact_mask=(True, True, False),
        mu_sent_elim=(0.3, 0.3, 0.3),
        mu_equiv_sub=(0.2, 0.2, 0.0),
        mu_ques_flip=0.4,
    )


def test_sampling_is_deterministic(small_sample):
    params = compute_params(RandomSelector(), small_sample)
    a = sample_perturbation(params, PerturbConfig(), rng_for(9, "s"))
    b = sample_perturbation(params, PerturbConfig(), rng_for(9, "s"))
    assert a == b


def test_sampling_marginals_match_parameters():
    # six facts and two rules, caps wide open so nothing is trimmed
    params = CategoricalParams(
        sentence_ids=tuple(range(8)),
        fact_mask=(True,) * 6 + (False,) * 2,
        mu_sent_elim=(0.3,) * 8,
        mu_equiv_sub=(0.2,) * 6 + (0.0,) * 2,
        mu_ques_flip=0.4,
    )
    config = PerturbConfig(max_sent_elim=8, max_equiv_sub=8)
    n = 100_000
    elim_counts = np.zeros(8)
    sub_counts = np.zeros(8)
    flips = 0
    for i in range(n):
        pset = sample_perturbation(params, config, rng_for(123, "m", i))
        for j, sid in enumerate(params.sentence_ids):
            elim_counts[j] += sid in pset.sent_elim
            sub_counts[j] += sid in pset.equiv_sub_targets
        flips += pset.ques_flip
    # substitution wins overlaps, so realized elimination on a fact is
    # mu_elim * (1 - mu_sub); rules keep their raw rate
    expected_elim = np.array([0.3 * 0.8] * 6 + [0.3] * 2)
    # a drawn target survives only if some other fact stays available;
    # each of the 5 others is unavailable with prob 0.2 + 0.8 * 0.3
    unavailable = 0.2 + 0.8 * 0.3
    expected_sub = np.array([0.2 * (1.0 - unavailable**5)] * 6 + [0.0] * 2)
    for got, want in zip(elim_counts / n, expected_elim):
        sigma = math.sqrt(want * (1 - want) / n)
        assert abs(got - want) < 3.5 * sigma + 1e-12
    for got, want in zip(sub_counts / n, expected_sub):
        sigma = math.sqrt(want * (1 - want) / n) if want else 0.0
        assert abs(got - want) <= 3.5 * sigma
    sigma = math.sqrt(0.4 * 0.6 / n)
    assert abs(flips / n - 0.4) < 3.5 * sigma


def test_caps_respected_under_greedy_parameters():
    n = 8
    params = CategoricalParams(
        sentence_ids=tuple(range(n)),
        fact_mask=(True,) * n,
        mu_sent_elim=(1.0 - MU_EPS,) * n,
        mu_equiv_sub=(1.0 - MU_EPS,) * n,
        mu_ques_flip=0.5,
    )
    config = PerturbConfig(max_sent_elim=3, max_equiv_sub=3)
    for i in range(50):
        pset = sample_perturbation(params, config, rng_for(77, "cap", i))
        assert len(pset.sent_elim) <= 3
        assert len(pset.equiv_sub) <= 3
        assert not pset.sent_elim & pset.equiv_sub_targets
        survivors = set(range(n)) - pset.sent_elim - pset.equiv_sub_targets
        for _, body in pset.equiv_sub:
            assert 0 < len(body) <= config.equiv_sub_body_size
            assert set(body) <= survivors


def test_cap_trim_keeps_highest_parameters():
    from logicprobe.policy import _trim_to_cap

    mus = {0: 0.9, 1: 0.99, 2: 0.95, 3: 0.97}
    assert _trim_to_cap([0, 1, 2, 3], mus, 2) == frozenset({1, 3})
    assert _trim_to_cap([0, 2], mus, 2) == frozenset({0, 2})
    ties = {0: 0.8, 1: 0.8, 2: 0.8}
    assert _trim_to_cap([0, 1, 2], ties, 2) == frozenset({0, 1})
    assert _trim_to_cap([2, 1, 0], ties, 2) == frozenset({0, 1})


def test_targets_without_candidates_are_dropped():
    # both facts drawn for substitution leaves no body facts at all
    params = CategoricalParams(
        sentence_ids=(0, 1),
        fact_mask=(True, True),
        mu_sent_elim=(MU_EPS, MU_EPS),
        mu_equiv_sub=(1.0 - MU_EPS, 1.0 - MU_EPS),
        mu_ques_flip=MU_EPS,
    )
    pset = sample_perturbation(params, PerturbConfig(), rng_for(5, "drop"))
    assert pset.equiv_sub == ()


def test_log_prob_matches_manual_bernoulli_sum():
    params = _fixed_params()
    pset = PerturbationSet(ques_flip=True, sent_elim=frozenset({2}), equiv_sub=((0, (1,)),))
    want = (
        math.log(0.4)
        + math.log(0.3) + math.log(0.7) + math.log(0.7)
        + math.log(0.2) + math.log(0.8)
    )
    assert set_log_prob(params, pset) == pytest.approx(want, rel=1e-12)


def test_sampled_sets_carry_their_log_prob():
    params = _fixed_params()
    for i in range(20):
        pset = sample_perturbation(params, PerturbConfig(), rng_for(3, "lp", i))
        assert pset.log_prob == pytest.approx(set_log_prob(params, pset), rel=1e-12)


# --- gradients and updates -----------------------------------------------------

def _flat_params_log_prob(theta, template, sample, pset):
    probe = template.copy()
    probe.load_flat(theta)
    cat = LearnedPolicy(probe).compute_params(sample)
    return set_log_prob(cat, pset)


def test_gradient_matches_finite_differences(corpus):
    params = PolicyParameters.random(rng_for(13, "gc"), hidden_size=4, scale=0.3)
    sample = corpus[0]
    cat = LearnedPolicy(params).compute_params(sample)
    pset = sample_perturbation(cat, PerturbConfig(), rng_for(13, "gc", "draw"))
    analytic = batch_log_prob_grad(params, sample, pset)
    theta = params.flatten()
    h = 1e-5
    idx = rng_for(13, "gc", "coords").choice(theta.size, size=60, replace=False)
    for k in idx:
        up = theta.copy()
        up[k] += h
        down = theta.copy()
        down[k] -= h
        fd = (
            _flat_params_log_prob(up, params, sample, pset)
            - _flat_params_log_prob(down, params, sample, pset)
        ) / (2 * h)
        assert analytic[k] == pytest.approx(fd, rel=2e-4, abs=2e-7)


def test_baseline_recurrence():
    b = BaselineState(decay=0.9)
    assert b.value is None
    b.update(2.0)
    assert b.value == pytest.approx(2.0)
    b.update(1.0)
    assert b.value == pytest.approx(0.9 * 2.0 + 0.1 * 1.0)


def test_reinforce_step_matches_manual_update(corpus):
    params = PolicyParameters.random(rng_for(17, "ru"), hidden_size=4, scale=0.2)
    before = params.flatten()
    config = TrainConfig(learning_rate=1e-2, baseline_decay=0.9)
    batch = []
    scores = (0.9, 0.2, 0.6)
    for i, (sample, p) in enumerate(zip(corpus[:3], scores)):
        cat = LearnedPolicy(params).compute_params(sample)
        pset = sample_perturbation(cat, config.perturb, rng_for(17, "ru", i))
        batch.append((sample, apply_set(sample, pset, config.perturb).with_victim(p)))

    grads = [batch_log_prob_grad(params, s, o.perturbation) for s, o in batch]
    signals = np.array([attack_signal(o) for _, o in batch])
    advantages = signals - signals.mean()
    want = before + config.learning_rate * sum(
        a * g for a, g in zip(advantages, grads)
    ) / len(batch)

    baseline = BaselineState(decay=0.9)
    stats = reinforce_step(params, batch, baseline, config)
    assert isinstance(stats, ReinforceStats)
    assert np.allclose(params.flatten(), want, atol=1e-12)
    assert baseline.value == pytest.approx(signals.mean())
    assert stats.mean_signal == pytest.approx(signals.mean())


def test_reinforce_second_batch_uses_prior_baseline(corpus):
    params = PolicyParameters.zeros(hidden_size=2)
    config = TrainConfig(learning_rate=1e-3)
    baseline = BaselineState(decay=0.9, value=-1.0)
    sample = corpus[0]
    cat = LearnedPolicy(params).compute_params(sample)
    pset = sample_perturbation(cat, config.perturb, rng_for(19, "b2"))
    outcome = apply_set(sample, pset, config.perturb).with_victim(0.7)
    signal = attack_signal(outcome)
    reinforce_step(params, [(sample, outcome)], baseline, config)
    assert baseline.value == pytest.approx(0.9 * -1.0 + 0.1 * signal)


def test_non_finite_signal_aborts(corpus):
    params = PolicyParameters.zeros(hidden_size=2)
    config = TrainConfig()
    sample = corpus[0]
    outcome = apply_set(sample, PerturbationSet(), config.perturb).with_victim(float("nan"))
    with pytest.raises(NonFiniteGradient):
        reinforce_step(params, [(sample, outcome)], BaselineState(), config)
    with pytest.raises(ValueError):
        reinforce_step(params, [], BaselineState(), config)


def test_attack_signal_reads_wrong_side(corpus):
    sample = corpus[0]
    outcome = apply_set(sample, PerturbationSet()).with_victim(0.75)
    want = math.log(0.75) if not sample.label else math.log(0.25)
    assert attack_signal(outcome) == pytest.approx(want)


def test_train_runs_and_reports(corpus):
    config = TrainConfig(rng_seed=4, epochs=2, batch_size=4, learning_rate=1e-3)
    victim = DepthLimitedVictim(0)
    result = train(PolicyParameters.zeros(hidden_size=4), corpus, victim, config, corpus[:6])
    assert len(result.history) == 3
    assert result.history[0]["epoch"] == 0
    assert 0.0 <= result.best_val_asr <= 1.0
    assert result.best_epoch in (0, 1, 2)
    for row in result.history[1:]:
        assert row["mean_signal"] is not None
