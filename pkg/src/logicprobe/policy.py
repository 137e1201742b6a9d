"""Perturbation policies and their score-function training loop.

A policy maps a sample to one independent Bernoulli parameter per
possible edit: eliminate sentence j, substitute fact j, flip the query.
Drawing every coordinate independently and trimming to the budget gives
a perturbation set; the learned policy is trained with REINFORCE against
a frozen victim, rewarding sets that push the victim toward the wrong
side of the recomputed gold label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteGradient
from .logic import Atom, Rule, Sample
from .metrics import rouge1, tokenize
from .perturb import AttackOutcome, PerturbConfig, PerturbationSet, apply_set
from .seeding import rng_for

FEATURE_DIM = 9
MU_EPS = 1e-4
_SIGNAL_FLOOR = 1e-12

FEATURE_NAMES = (
    "rouge1_with_query",
    "kind_fact",
    "kind_rule",
    "kind_query",
    "length_tokens_over_10",
    "shares_predicate_with_query",
    "shares_entity_with_query",
    "has_naf",
    "bias",
)


def _clause_predicates(clause) -> set[str]:
    if isinstance(clause, Atom):
        return {clause.predicate}
    preds = {clause.head.predicate}
    preds.update(lit.atom.predicate for lit in clause.body)
    return preds


def _clause_constants(clause) -> set[str]:
    atoms = [clause] if isinstance(clause, Atom) else [clause.head] + [
        lit.atom for lit in clause.body
    ]
    out: set[str] = set()
    for atom in atoms:
        out.update(t.name for t in atom.args if not t.is_variable)
    return out


def compute_features(sample: Sample) -> np.ndarray:
    """Feature matrix with the query in row 0 and sentence j in row j+1."""
    n = len(sample.theory.sentences)
    feats = np.zeros((n + 1, FEATURE_DIM))
    q_pred = sample.query.atom.predicate
    q_consts = {t.name for t in sample.query.atom.args if not t.is_variable}

    feats[0, 0] = 1.0
    feats[0, 3] = 1.0
    feats[0, 4] = len(tokenize(sample.nl_query)) / 10.0
    feats[0, 5] = 1.0
    feats[0, 6] = 1.0
    feats[0, 7] = 1.0 if sample.query.naf else 0.0
    feats[0, 8] = 1.0

    for j, (sentence, line) in enumerate(zip(sample.theory.sentences, sample.nl_context)):
        row = feats[j + 1]
        clause = sentence.clause
        is_rule = isinstance(clause, Rule)
        row[0] = rouge1(sample.nl_query, line)
        row[1] = 0.0 if is_rule else 1.0
        row[2] = 1.0 if is_rule else 0.0
        row[4] = len(tokenize(line)) / 10.0
        row[5] = 1.0 if q_pred in _clause_predicates(clause) else 0.0
        row[6] = 1.0 if q_consts & _clause_constants(clause) else 0.0
        row[7] = 1.0 if is_rule and any(l.negated for l in clause.body) else 0.0
        row[8] = 1.0
    return feats


@dataclass(frozen=True)
class CategoricalParams:
    """Per-edit Bernoulli parameters for one sample.

    ``mu_equiv_sub`` is exactly 0.0 on rule sentences: only facts can be
    substituted, and a zero parameter never selects and contributes no
    probability mass either way.
    """

    sentence_ids: tuple[int, ...]
    fact_mask: tuple[bool, ...]
    mu_sent_elim: tuple[float, ...]
    mu_equiv_sub: tuple[float, ...]
    mu_ques_flip: float

    def __post_init__(self) -> None:
        n = len(self.sentence_ids)
        if len(self.mu_sent_elim) != n or len(self.mu_equiv_sub) != n or len(self.fact_mask) != n:
            raise ValueError("parameter vectors must align with sentence ids")
        for mu in (*self.mu_sent_elim, self.mu_ques_flip):
            if not MU_EPS <= mu <= 1.0 - MU_EPS:
                raise ValueError("parameters must lie inside the clamp interval")
        for is_fact, mu in zip(self.fact_mask, self.mu_equiv_sub):
            if is_fact:
                if not MU_EPS <= mu <= 1.0 - MU_EPS:
                    raise ValueError("fact substitution parameters must be clamped")
            elif mu != 0.0:
                raise ValueError("rule sentences cannot carry substitution mass")


def _clamp(mu: np.ndarray | float):
    return np.clip(mu, MU_EPS, 1.0 - MU_EPS)


class PolicyHead:
    """One-hidden-layer scorer: mu = sigmoid(w_out . relu(W h + b) + b_out)."""

    def __init__(self, w_hidden: np.ndarray, b_hidden: np.ndarray, w_out: np.ndarray, b_out: float):
        self.w_hidden = np.asarray(w_hidden, dtype=float)
        self.b_hidden = np.asarray(b_hidden, dtype=float)
        self.w_out = np.asarray(w_out, dtype=float)
        self.b_out = float(b_out)

    @classmethod
    def zeros(cls, hidden_size: int, feature_dim: int = FEATURE_DIM) -> "PolicyHead":
        return cls(
            np.zeros((hidden_size, feature_dim)),
            np.zeros(hidden_size),
            np.zeros(hidden_size),
            0.0,
        )

    @classmethod
    def random(cls, rng: np.random.Generator, hidden_size: int, feature_dim: int = FEATURE_DIM, scale: float = 0.1) -> "PolicyHead":
        return cls(
            scale * rng.standard_normal((hidden_size, feature_dim)),
            scale * rng.standard_normal(hidden_size),
            scale * rng.standard_normal(hidden_size),
            scale * float(rng.standard_normal()),
        )

    def copy(self) -> "PolicyHead":
        return PolicyHead(self.w_hidden.copy(), self.b_hidden.copy(), self.w_out.copy(), self.b_out)

    def forward(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Raw sigmoid activations and hidden pre-activations for each row."""
        pre = rows @ self.w_hidden.T + self.b_hidden
        hidden = np.maximum(pre, 0.0)
        z = hidden @ self.w_out + self.b_out
        return 1.0 / (1.0 + np.exp(-z)), pre

    def mu(self, rows: np.ndarray) -> np.ndarray:
        raw, _ = self.forward(rows)
        return _clamp(raw)

    def to_json(self) -> dict:
        return {
            "w_hidden": self.w_hidden.tolist(),
            "b_hidden": self.b_hidden.tolist(),
            "w_out": self.w_out.tolist(),
            "b_out": self.b_out,
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PolicyHead":
        return cls(
            np.array(payload["w_hidden"], dtype=float),
            np.array(payload["b_hidden"], dtype=float),
            np.array(payload["w_out"], dtype=float),
            float(payload["b_out"]),
        )


HEAD_NAMES = ("sent_elim", "equiv_sub", "ques_flip")


class PolicyParameters:
    """The three heads of a learned policy, plus their shapes."""

    def __init__(self, heads: dict[str, PolicyHead], hidden_size: int, feature_dim: int = FEATURE_DIM):
        if set(heads) != set(HEAD_NAMES):
            raise ValueError(f"heads must be exactly {HEAD_NAMES}")
        self.heads = heads
        self.hidden_size = hidden_size
        self.feature_dim = feature_dim

    @classmethod
    def zeros(cls, hidden_size: int = 16, feature_dim: int = FEATURE_DIM) -> "PolicyParameters":
        return cls(
            {name: PolicyHead.zeros(hidden_size, feature_dim) for name in HEAD_NAMES},
            hidden_size,
            feature_dim,
        )

    @classmethod
    def random(cls, rng: np.random.Generator, hidden_size: int = 16, feature_dim: int = FEATURE_DIM, scale: float = 0.1) -> "PolicyParameters":
        return cls(
            {name: PolicyHead.random(rng, hidden_size, feature_dim, scale) for name in HEAD_NAMES},
            hidden_size,
            feature_dim,
        )

    def copy(self) -> "PolicyParameters":
        return PolicyParameters(
            {name: head.copy() for name, head in self.heads.items()},
            self.hidden_size,
            self.feature_dim,
        )

    def flatten(self) -> np.ndarray:
        """All weights as one vector, for finite-difference checks."""
        parts = []
        for name in HEAD_NAMES:
            head = self.heads[name]
            parts.extend([head.w_hidden.ravel(), head.b_hidden, head.w_out, [head.b_out]])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def load_flat(self, theta: np.ndarray) -> None:
        i = 0
        for name in HEAD_NAMES:
            head = self.heads[name]
            for arr in (head.w_hidden, head.b_hidden, head.w_out):
                arr.flat[:] = theta[i : i + arr.size]
                i += arr.size
            head.b_out = float(theta[i])
            i += 1
        if i != theta.size:
            raise ValueError("flat vector has the wrong size")

    def to_json(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "feature_dim": self.feature_dim,
            "heads": {name: self.heads[name].to_json() for name in HEAD_NAMES},
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PolicyParameters":
        heads = {name: PolicyHead.from_json(payload["heads"][name]) for name in HEAD_NAMES}
        return cls(heads, int(payload["hidden_size"]), int(payload["feature_dim"]))


class RandomSelector:
    """Every edit carries probability one half."""

    name = "random"

    def compute_params(self, sample: Sample) -> CategoricalParams:
        n = len(sample.theory.sentences)
        fact_sids = {sid for sid, _ in sample.theory.facts}
        fact_mask = tuple(s.sid in fact_sids for s in sample.theory.sentences)
        return CategoricalParams(
            sentence_ids=sample.theory.sentence_ids,
            fact_mask=fact_mask,
            mu_sent_elim=(0.5,) * n,
            mu_equiv_sub=tuple(0.5 if f else 0.0 for f in fact_mask),
            mu_ques_flip=0.5,
        )


class UnigramSelector:
    """Prefers sentences whose wording overlaps the query.

    Each sentence parameter is 0.5 shifted by how far its overlap with
    the query sits from the corpus mean, clamped to the usual interval.
    """

    name = "unigram"

    def __init__(self, mean_overlap: float):
        self.mean_overlap = float(mean_overlap)

    @classmethod
    def fit(cls, samples) -> "UnigramSelector":
        total = 0.0
        count = 0
        for sample in samples:
            for line in sample.nl_context:
                total += rouge1(sample.nl_query, line)
                count += 1
        return cls(total / count if count else 0.0)

    def compute_params(self, sample: Sample) -> CategoricalParams:
        fact_sids = {sid for sid, _ in sample.theory.facts}
        fact_mask = tuple(s.sid in fact_sids for s in sample.theory.sentences)
        mus = tuple(
            float(_clamp(0.5 - self.mean_overlap + rouge1(sample.nl_query, line)))
            for line in sample.nl_context
        )
        return CategoricalParams(
            sentence_ids=sample.theory.sentence_ids,
            fact_mask=fact_mask,
            mu_sent_elim=mus,
            mu_equiv_sub=tuple(m if f else 0.0 for m, f in zip(mus, fact_mask)),
            mu_ques_flip=0.5,
        )


class LearnedPolicy:
    """Neural policy over engineered sentence features."""

    name = "learned"

    def __init__(self, params: PolicyParameters):
        self.params = params

    def compute_params(self, sample: Sample) -> CategoricalParams:
        feats = compute_features(sample)
        query_row = feats[:1]
        sent_rows = feats[1:]
        fact_sids = {sid for sid, _ in sample.theory.facts}
        fact_mask = tuple(s.sid in fact_sids for s in sample.theory.sentences)
        mu_elim = self.params.heads["sent_elim"].mu(sent_rows)
        mu_sub = self.params.heads["equiv_sub"].mu(sent_rows)
        mu_flip = float(self.params.heads["ques_flip"].mu(query_row)[0])
        return CategoricalParams(
            sentence_ids=sample.theory.sentence_ids,
            fact_mask=fact_mask,
            mu_sent_elim=tuple(float(m) for m in mu_elim),
            mu_equiv_sub=tuple(float(m) if f else 0.0 for m, f in zip(mu_sub, fact_mask)),
            mu_ques_flip=mu_flip,
        )


Policy = RandomSelector | UnigramSelector | LearnedPolicy


def compute_params(policy: Policy, sample: Sample) -> CategoricalParams:
    return policy.compute_params(sample)


def _trim_to_cap(selected: list[int], mus: dict[int, float], cap: int) -> frozenset[int]:
    if len(selected) <= cap:
        return frozenset(selected)
    ranked = sorted(selected, key=lambda sid: (-mus[sid], sid))
    return frozenset(ranked[:cap])


def sample_perturbation(
    params: CategoricalParams, config: PerturbConfig, rng: np.random.Generator
) -> PerturbationSet:
    """Draw every coordinate independently, then trim to the budget.

    Draw order is fixed (eliminations, substitutions, flip, then rule
    bodies), so one seed yields one perturbation set.  When a sentence is
    drawn for both elimination and substitution, substitution wins.  Over
    budget, the highest parameters survive, ties to the lower sentence
    id.  The returned log-probability scores the realized indicator
    sets, substitution body choices excluded.
    """
    n = len(params.sentence_ids)
    u = rng.random(2 * n + 1)
    elim_mus = dict(zip(params.sentence_ids, params.mu_sent_elim))
    sub_mus = dict(zip(params.sentence_ids, params.mu_equiv_sub))

    elim_raw = [sid for i, sid in enumerate(params.sentence_ids) if u[i] < params.mu_sent_elim[i]]
    sub_raw = [
        sid
        for i, sid in enumerate(params.sentence_ids)
        if params.fact_mask[i] and u[n + i] < params.mu_equiv_sub[i]
    ]
    flip = bool(u[2 * n] < params.mu_ques_flip)

    sub_set = _trim_to_cap(sub_raw, sub_mus, config.max_equiv_sub)
    elim_set = _trim_to_cap([s for s in elim_raw if s not in sub_set], elim_mus, config.max_sent_elim)

    fact_sids = {sid for sid, f in zip(params.sentence_ids, params.fact_mask) if f}
    candidates = sorted(fact_sids - sub_set - elim_set)
    subs: list[tuple[int, tuple[int, ...]]] = []
    for target in sorted(sub_set):
        if not candidates:
            continue
        size = min(config.equiv_sub_body_size, len(candidates))
        body = rng.choice(candidates, size=size, replace=False)
        subs.append((target, tuple(sorted(int(b) for b in body))))

    pset = PerturbationSet(
        ques_flip=flip,
        sent_elim=elim_set,
        equiv_sub=tuple(sorted(subs)),
        log_prob=0.0,
    )
    return PerturbationSet(flip, elim_set, pset.equiv_sub, set_log_prob(params, pset))


def set_log_prob(params: CategoricalParams, pset: PerturbationSet) -> float:
    """Log-probability of the realized indicator sets under the params."""
    targets = pset.equiv_sub_targets
    total = 0.0
    for sid, mu in zip(params.sentence_ids, params.mu_sent_elim):
        total += math.log(mu) if sid in pset.sent_elim else math.log1p(-mu)
    for sid, mu in zip(params.sentence_ids, params.mu_equiv_sub):
        if mu == 0.0:
            continue
        total += math.log(mu) if sid in targets else math.log1p(-mu)
    total += math.log(params.mu_ques_flip) if pset.ques_flip else math.log1p(-params.mu_ques_flip)
    return total


@dataclass
class BaselineState:
    """Exponentially decayed moving average of the training signal."""

    decay: float = 0.9
    value: float | None = None

    def update(self, mean_signal: float) -> float:
        if self.value is None:
            self.value = mean_signal
        else:
            self.value = self.decay * self.value + (1.0 - self.decay) * mean_signal
        return self.value


@dataclass(frozen=True)
class TrainConfig:
    rng_seed: int = 0
    epochs: int = 5
    batch_size: int = 8
    learning_rate: float = 5e-6
    baseline_decay: float = 0.9
    perturb: PerturbConfig = field(default_factory=PerturbConfig)


@dataclass(frozen=True)
class ReinforceStats:
    mean_signal: float
    mean_advantage: float
    grad_norm: float
    baseline_after: float


def attack_signal(outcome: AttackOutcome) -> float:
    """Log-probability the victim assigned to the wrong side of the label."""
    if outcome.victim_prob_true is None:
        raise ValueError("outcome has no victim score")
    wanted = not outcome.perturbed.label
    p = outcome.victim_prob_true if wanted else 1.0 - outcome.victim_prob_true
    return math.log(max(p, _SIGNAL_FLOOR))


def _zero_grads(params: PolicyParameters) -> dict[str, dict[str, np.ndarray]]:
    grads: dict[str, dict[str, np.ndarray]] = {}
    for name in HEAD_NAMES:
        head = params.heads[name]
        grads[name] = {
            "w_hidden": np.zeros_like(head.w_hidden),
            "b_hidden": np.zeros_like(head.b_hidden),
            "w_out": np.zeros_like(head.w_out),
            "b_out": np.zeros(1),
        }
    return grads


def _accumulate_head(
    grads: dict[str, np.ndarray],
    head: PolicyHead,
    rows: np.ndarray,
    indicators: np.ndarray,
    active: np.ndarray,
    weight: float,
) -> None:
    """Add weight * d log p / d theta for one head over the given rows.

    For a Bernoulli with mean sigmoid(z), d log p / d z is x - mu; the
    clamp zeroes the derivative outside its interval, and inactive rows
    (rule sentences for the substitution head) contribute nothing.
    """
    raw, pre = head.forward(rows)
    in_range = (raw > MU_EPS) & (raw < 1.0 - MU_EPS)
    g = np.where(active & in_range, indicators - raw, 0.0) * weight
    if not np.any(g):
        return
    hidden = np.maximum(pre, 0.0)
    grads["b_out"] += g.sum()
    grads["w_out"] += g @ hidden
    d_pre = np.outer(g, head.w_out) * (pre > 0.0)
    grads["b_hidden"] += d_pre.sum(axis=0)
    grads["w_hidden"] += d_pre.T @ rows


def reinforce_step(
    params: PolicyParameters,
    batch: list[tuple[Sample, AttackOutcome]],
    baseline: BaselineState,
    config: TrainConfig,
) -> ReinforceStats:
    """One in-place gradient ascent step on the score-function estimator.

    The baseline is frozen while advantages are computed and refreshed
    afterwards; on the very first batch it is seeded with the batch mean
    so early advantages are centered.
    """
    if not batch:
        raise ValueError("empty batch")
    signals = np.array([attack_signal(outcome) for _, outcome in batch])
    if not np.all(np.isfinite(signals)):
        raise NonFiniteGradient("non-finite training signal")
    if baseline.value is None:
        baseline.value = float(signals.mean())
        base = baseline.value
        refresh = False
    else:
        base = baseline.value
        refresh = True
    advantages = signals - base

    grads = _zero_grads(params)
    for (sample, outcome), adv in zip(batch, advantages):
        if adv == 0.0:
            continue
        weight = float(adv) / len(batch)
        feats = compute_features(sample)
        query_row = feats[:1]
        sent_rows = feats[1:]
        fact_sids = {sid for sid, _ in sample.theory.facts}
        sids = sample.theory.sentence_ids
        pset = outcome.perturbation

        x_elim = np.array([1.0 if sid in pset.sent_elim else 0.0 for sid in sids])
        x_sub = np.array([1.0 if sid in pset.equiv_sub_targets else 0.0 for sid in sids])
        fact_rows = np.array([sid in fact_sids for sid in sids])
        all_rows = np.ones(len(sids), dtype=bool)

        _accumulate_head(grads["sent_elim"], params.heads["sent_elim"], sent_rows, x_elim, all_rows, weight)
        _accumulate_head(grads["equiv_sub"], params.heads["equiv_sub"], sent_rows, x_sub, fact_rows, weight)
        _accumulate_head(
            grads["ques_flip"],
            params.heads["ques_flip"],
            query_row,
            np.array([1.0 if pset.ques_flip else 0.0]),
            np.array([True]),
            weight,
        )

    flat = np.concatenate(
        [grads[name][key].ravel() for name in HEAD_NAMES for key in ("w_hidden", "b_hidden", "w_out", "b_out")]
    )
    if not np.all(np.isfinite(flat)):
        raise NonFiniteGradient("non-finite policy gradient")
    grad_norm = float(np.linalg.norm(flat))

    lr = config.learning_rate
    for name in HEAD_NAMES:
        head = params.heads[name]
        head.w_hidden += lr * grads[name]["w_hidden"]
        head.b_hidden += lr * grads[name]["b_hidden"]
        head.w_out += lr * grads[name]["w_out"]
        head.b_out += lr * float(grads[name]["b_out"][0])

    if refresh:
        baseline.update(float(signals.mean()))
    return ReinforceStats(
        mean_signal=float(signals.mean()),
        mean_advantage=float(advantages.mean()),
        grad_norm=grad_norm,
        baseline_after=float(baseline.value),
    )


def batch_log_prob_grad(params: PolicyParameters, sample: Sample, pset: PerturbationSet) -> np.ndarray:
    """Flat gradient of the set's log-probability, for estimator checks."""
    grads = _zero_grads(params)
    feats = compute_features(sample)
    query_row = feats[:1]
    sent_rows = feats[1:]
    fact_sids = {sid for sid, _ in sample.theory.facts}
    sids = sample.theory.sentence_ids
    x_elim = np.array([1.0 if sid in pset.sent_elim else 0.0 for sid in sids])
    x_sub = np.array([1.0 if sid in pset.equiv_sub_targets else 0.0 for sid in sids])
    fact_rows = np.array([sid in fact_sids for sid in sids])
    all_rows = np.ones(len(sids), dtype=bool)
    _accumulate_head(grads["sent_elim"], params.heads["sent_elim"], sent_rows, x_elim, all_rows, 1.0)
    _accumulate_head(grads["equiv_sub"], params.heads["equiv_sub"], sent_rows, x_sub, fact_rows, 1.0)
    _accumulate_head(
        grads["ques_flip"],
        params.heads["ques_flip"],
        query_row,
        np.array([1.0 if pset.ques_flip else 0.0]),
        np.array([True]),
        1.0,
    )
    return np.concatenate(
        [grads[name][key].ravel() for name in HEAD_NAMES for key in ("w_hidden", "b_hidden", "w_out", "b_out")]
    )


@dataclass(frozen=True)
class TrainResult:
    params: "PolicyParameters"
    history: tuple[dict, ...]
    best_epoch: int
    best_val_asr: float
    batch_log: tuple[dict, ...] = ()


def _evaluate_asr(
    policy: LearnedPolicy,
    samples,
    victim,
    config: TrainConfig,
    epoch: int,
) -> float:
    wins = 0
    for i, sample in enumerate(samples):
        rng = rng_for(config.rng_seed, "val", epoch, i)
        params = policy.compute_params(sample)
        pset = sample_perturbation(params, config.perturb, rng)
        outcome = apply_set(sample, pset, config.perturb)
        score = victim.score(outcome.perturbed.nl_query, outcome.perturbed.nl_context)
        if outcome.with_victim(score).success:
            wins += 1
    return wins / len(samples) if len(samples) else 0.0


def train(
    initial: PolicyParameters,
    train_samples,
    victim,
    config: TrainConfig,
    val_samples=None,
) -> TrainResult:
    """REINFORCE training with best-epoch selection on validation attacks.

    The victim only supplies scores; its weights never move.  Validation
    attack success is measured after every epoch and the parameters from
    the best epoch are returned (epoch 0 means the untrained policy).
    """
    train_samples = list(train_samples)
    val_samples = list(val_samples) if val_samples is not None else train_samples
    params = initial.copy()
    baseline = BaselineState(decay=config.baseline_decay)
    history: list[dict] = []

    best = params.copy()
    best_asr = _evaluate_asr(LearnedPolicy(params), val_samples, victim, config, epoch=0)
    best_epoch = 0
    history.append({"epoch": 0, "val_asr": best_asr, "mean_signal": None, "baseline": None})

    batch_log: list[dict] = []
    for epoch in range(1, config.epochs + 1):
        policy = LearnedPolicy(params)
        epoch_signals: list[float] = []
        for batch_index, start in enumerate(range(0, len(train_samples), config.batch_size)):
            chunk = train_samples[start : start + config.batch_size]
            batch: list[tuple[Sample, AttackOutcome]] = []
            for offset, sample in enumerate(chunk):
                rng = rng_for(config.rng_seed, "train", epoch, start + offset)
                cat = policy.compute_params(sample)
                pset = sample_perturbation(cat, config.perturb, rng)
                outcome = apply_set(sample, pset, config.perturb)
                score = victim.score(outcome.perturbed.nl_query, outcome.perturbed.nl_context)
                batch.append((sample, outcome.with_victim(score)))
            stats = reinforce_step(params, batch, baseline, config)
            epoch_signals.append(stats.mean_signal)
            batch_log.append(
                {"epoch": epoch, "batch": batch_index, "mean_advantage": stats.mean_advantage}
            )
        val_asr = _evaluate_asr(LearnedPolicy(params), val_samples, victim, config, epoch)
        if batch_log and batch_log[-1]["epoch"] == epoch:
            batch_log[-1]["val_asr"] = val_asr
        history.append(
            {
                "epoch": epoch,
                "val_asr": val_asr,
                "mean_signal": float(np.mean(epoch_signals)) if epoch_signals else None,
                "baseline": baseline.value,
            }
        )
        if val_asr > best_asr:
            best, best_asr, best_epoch = params.copy(), val_asr, epoch
    return TrainResult(
        params=best,
        history=tuple(history),
        best_epoch=best_epoch,
        best_val_asr=best_asr,
        batch_log=tuple(batch_log),
    )
