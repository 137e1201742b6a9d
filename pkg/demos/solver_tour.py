"""
A tour of the logic core
========================

Parse a small program, inspect its perfect model, ask queries both
ways, and look at the proof metadata the harness buckets by.
"""

from logicprobe import entails, evaluate, extract_proof, parse_program, parse_query_text

# A stratified program: two facts, a positive chain, and one rule that
# uses negation-as-failure. The text form is one clause per line.
program = parse_program(
    """
smart(anne).
big(bob).
kind(X) :- smart(X).
quiet(X) :- not smart(X).
"""
)

# The perfect model is computed stratum by stratum; lower strata are
# settled before any rule reads them through "not".
model = evaluate(program)
print("true atoms:", sorted(str(a) for a in model.true_atoms))
print("strata:", [sorted(s) for s in model.strata])

# Queries are ground literals. Under the closed-world assumption the
# positive and negated forms always disagree.
for text in ("kind(anne)", "not kind(anne)", "quiet(bob)", "kind(bob)"):
    query = parse_query_text(text)
    print(f"{text:>15} -> {entails(program, query)}")

# Proof metadata: depth counts rule applications along a minimal
# derivation, length counts the context sentences it touches. For a
# non-derivable atom both describe the failed backward exploration.
for text in ("kind(anne)", "quiet(bob)", "green(anne)"):
    info = extract_proof(program, parse_query_text(text))
    print(f"{text:>15} -> depth {info.depth}, length {info.length}")
