"""
Attacking a shallow reasoner
============================

Generate a small evaluation set, attack a depth-limited victim with
random perturbation sets, and inspect one successful adversarial
example end to end.
"""

from logicprobe import GenConfig, RandomSelector, generate_dataset
from logicprobe.harness import AttackRunConfig, run_attack, transferability
from logicprobe.victims import DepthLimitedVictim, OracleVictim

# 60 balanced samples: half entailed, half not, spread over proof
# depths 0..2.
dataset = generate_dataset(GenConfig(rng_seed=7, n_samples=60), "demo")

# The victim only answers with a probability of entailment; it never
# exposes gradients or weights. depth:1 follows at most one rule
# application, so deeper proofs and negation confuse it.
victim = DepthLimitedVictim(1)

# Best-of-4: draw four perturbation sets per input, keep the strongest.
report, outcomes = run_attack(
    RandomSelector(), dataset, victim, AttackRunConfig(rng_seed=11, samples_per_input=4)
)
print(f"attack success rate: {report.asr:.3f}")
print(f"sentence overlap with originals (F1): {report.f1_mean:.3f}")
print(f"success by original proof depth: {report.asr_by_proof_depth}")

# Every outcome is logically consistent: the stored label is what the
# solver says about the perturbed program, so a success is a genuine
# victim mistake, never a corrupted sample.
win = next(o for o in outcomes if o.success)
original = next(
    s for s, i in zip(dataset.samples, dataset.ids) if i == win.original_id
)
print("\noriginal context: ", " ".join(original.nl_context))
print("original query:   ", original.nl_query, "->", original.label)
print("perturbed context:", " ".join(win.perturbed.nl_context))
print("perturbed query:  ", win.perturbed.nl_query, "->", win.perturbed.label)
print(f"victim says p(entailed) = {win.victim_prob_true:.2f}  (wrong side)")

# The oracle victim parses and solves each query itself, so consistent
# attacks never transfer to it; a weaker heuristic is another story.
print("\ntransfer of the successes:")
for other in (OracleVictim(), DepthLimitedVictim(0)):
    rate = transferability(outcomes, other)
    print(f"  vs {other.name:>8}: {rate:.3f}")
