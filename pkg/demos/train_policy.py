"""
Training the perturbation policy
================================

REINFORCE over the three perturbation heads: which sentences to drop,
which facts to rewrite as rules, and whether to negate the query. The
victim stays a black box throughout; only its probabilities are read.
"""

from logicprobe import (
    GenConfig,
    PolicyParameters,
    RandomSelector,
    TrainConfig,
    generate_dataset,
    train,
)
from logicprobe.harness import AttackRunConfig, run_attack
from logicprobe.policy import LearnedPolicy
from logicprobe.victims import DepthLimitedVictim

train_set = generate_dataset(GenConfig(rng_seed=1, n_samples=800), "train")
val_set = generate_dataset(GenConfig(rng_seed=2, n_samples=200), "val")
victim = DepthLimitedVictim(1)

# Where the bar sits: random perturbation sets on the validation split.
baseline, _ = run_attack(RandomSelector(), val_set, victim, AttackRunConfig(rng_seed=3))
print(f"random selector val ASR: {baseline.asr:.3f}")

# Zero-initialized heads start at mu = 0.5 everywhere, i.e. exactly the
# random selector; the gradient steps move them away from that.
result = train(
    PolicyParameters.zeros(hidden_size=16),
    train_set.samples,
    victim,
    TrainConfig(rng_seed=4, epochs=3, batch_size=16, learning_rate=0.05),
    val_set.samples,
)
for row in result.history:
    print(f"epoch {row['epoch']}: val ASR {row['val_asr']:.3f}")
print(f"best epoch: {result.best_epoch} at {result.best_val_asr:.3f}")

# Best-of-k decoding stacks on top of the trained policy: more draws
# per input can only improve the kept outcome.
policy = LearnedPolicy(result.params)
for k in (1, 4, 16):
    report, _ = run_attack(
        policy, val_set, victim, AttackRunConfig(rng_seed=5, samples_per_input=k)
    )
    print(f"best-of-{k:<2} val ASR: {report.asr:.3f}")
