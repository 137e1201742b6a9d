"""File formats: dataset JSONL, outcome JSONL, checkpoints, run manifests.

All writers emit byte-stable output: fixed key order, compact separators,
ASCII escapes, and no timestamps. Reruns with identical configs and seeds
produce identical bytes (a tested guarantee).
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Iterable

from . import (
    CHECKPOINT_SCHEMA_VERSION,
    DATASET_SCHEMA_VERSION,
    OUTCOME_SCHEMA_VERSION,
    __version__,
)
from .logic import Sample, parse_program, parse_query_text, program_to_text, query_to_text
from .nl import TEMPLATE_TABLE_VERSION, DEFAULT_TABLE


def dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=True)


def canonical_config_hash(config: dict) -> str:
    blob = json.dumps(config, separators=(",", ":"), ensure_ascii=True, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# dataset JSONL


def sample_to_row(sample_id: str, sample: Sample, split: str) -> dict:
    return {
        "id": sample_id,
        "nl_query": sample.nl_query,
        "nl_context": list(sample.nl_context),
        "program_text": program_to_text(sample.theory),
        "query_text": query_to_text(sample.query),
        "label": sample.label,
        "proof_depth": sample.proof_depth,
        "proof_length": sample.proof_length,
        "split": split,
        "schema_version": DATASET_SCHEMA_VERSION,
    }


def row_to_sample(row: dict) -> Sample:
    return Sample(
        query=parse_query_text(row["query_text"]),
        theory=parse_program(row["program_text"]),
        label=bool(row["label"]),
        proof_depth=int(row["proof_depth"]),
        proof_length=int(row["proof_length"]),
        nl_query=row["nl_query"],
        nl_context=tuple(row["nl_context"]),
    )


def write_jsonl(path: str, rows: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(dumps(row))
            fh.write("\n")


def read_jsonl(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_dataset(path: str):
    """Read a dataset JSONL file back into a Dataset."""
    from .generate import Dataset

    rows = read_jsonl(path)
    samples = []
    ids = []
    split = "train"
    for row in rows:
        if row.get("schema_version") != DATASET_SCHEMA_VERSION:
            raise ValueError(f"unsupported dataset schema {row.get('schema_version')!r}")
        samples.append(row_to_sample(row))
        ids.append(row["id"])
        split = row.get("split", split)
    return Dataset(tuple(samples), tuple(ids), split, ())


def save_dataset(dataset, path: str, config: dict, rng_seed: int | None) -> None:
    """Write dataset JSONL plus its manifest."""
    rows = (sample_to_row(i, s, dataset.split) for i, s in zip(dataset.ids, dataset.samples))
    write_jsonl(path, rows)
    write_manifest(manifest_path_for(path), "dataset", config, rng_seed, [path])


# ---------------------------------------------------------------------------
# outcome JSONL


def outcome_to_row(outcome) -> dict:
    pset = outcome.perturbation
    return {
        "original_id": outcome.original_id,
        "success": outcome.success,
        "solver_failed": outcome.solver_failed,
        "consistent": outcome.consistent,
        "victim_prob_true": outcome.victim_prob_true,
        "original_label": outcome.original_label,
        "original_proof_depth": outcome.original_proof_depth,
        "original_proof_length": outcome.original_proof_length,
        "ques_flip": pset.ques_flip,
        "sent_elim": sorted(pset.sent_elim),
        "equiv_sub": [[t, list(body)] for t, body in pset.equiv_sub],
        "log_prob": pset.log_prob,
        "perturbed": sample_to_row(outcome.original_id + "-adv", outcome.perturbed, "adv"),
        "schema_version": OUTCOME_SCHEMA_VERSION,
    }


def row_to_outcome(row: dict):
    from .perturb import AttackOutcome, PerturbationSet

    if row.get("schema_version") != OUTCOME_SCHEMA_VERSION:
        raise ValueError(f"unsupported outcome schema {row.get('schema_version')!r}")
    pset = PerturbationSet(
        ques_flip=bool(row["ques_flip"]),
        sent_elim=frozenset(row["sent_elim"]),
        equiv_sub=tuple((int(t), tuple(body)) for t, body in row["equiv_sub"]),
        log_prob=float(row["log_prob"]),
    )
    return AttackOutcome(
        original_id=row["original_id"],
        perturbed=row_to_sample(row["perturbed"]),
        perturbation=pset,
        original_label=bool(row["original_label"]),
        original_proof_depth=int(row["original_proof_depth"]),
        original_proof_length=int(row["original_proof_length"]),
        solver_failed=bool(row["solver_failed"]),
        consistent=bool(row["consistent"]),
        victim_prob_true=row["victim_prob_true"],
        success=bool(row["success"]),
    )


# ---------------------------------------------------------------------------
# manifests


def write_manifest(path: str, kind: str, config: dict, rng_seed: int | None,
                   outputs: list[str], incomplete: bool = False) -> dict:
    manifest = {
        "kind": kind,
        "tool_version": __version__,
        "dataset_schema_version": DATASET_SCHEMA_VERSION,
        "outcome_schema_version": OUTCOME_SCHEMA_VERSION,
        "template_table_version": TEMPLATE_TABLE_VERSION,
        "lexicon_version": DEFAULT_TABLE.lexicon.version,
        "config": config,
        "config_hash": canonical_config_hash(config),
        "rng_seed": rng_seed,
        "outputs": sorted(outputs),
        "incomplete": incomplete,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=True))
        fh.write("\n")
    return manifest


def manifest_path_for(output_path: str) -> str:
    return output_path + ".manifest.json"


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(path: str, payload: dict) -> None:
    body = {"schema_version": CHECKPOINT_SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(body, indent=2, sort_keys=True, ensure_ascii=True))
        fh.write("\n")


def load_checkpoint(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        body = json.load(fh)
    if body.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema {body.get('schema_version')!r}")
    return body
