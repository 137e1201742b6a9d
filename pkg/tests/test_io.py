"""Serialization: dataset rows, outcome rows, manifests, checkpoints."""

import json

import numpy as np
import pytest

from logicprobe import (
    GenConfig,
    PerturbationSet,
    PolicyParameters,
    generate_dataset,
)
from logicprobe.io import (
    canonical_config_hash,
    dumps,
    load_checkpoint,
    load_dataset,
    manifest_path_for,
    outcome_to_row,
    read_jsonl,
    row_to_outcome,
    row_to_sample,
    sample_to_row,
    save_checkpoint,
    save_dataset,
    write_jsonl,
    write_manifest,
)
from logicprobe.logic import program_to_text
from logicprobe.perturb import apply_set


def small_dataset():
    return generate_dataset(GenConfig(rng_seed=5, n_samples=12), "io")


def test_dumps_is_compact_ascii():
    assert dumps({"b": 1, "a": "café"}) == '{"b":1,"a":"caf\\u00e9"}'


def test_config_hash_ignores_key_order():
    assert canonical_config_hash({"a": 1, "b": 2}) == canonical_config_hash({"b": 2, "a": 1})
    assert canonical_config_hash({"a": 1}) != canonical_config_hash({"a": 2})
    assert len(canonical_config_hash({})) == 16


def test_jsonl_round_trip(tmp_path):
    rows = [{"id": "x", "note": "naïve"}, {"id": "y", "n": 3}]
    path = str(tmp_path / "rows.jsonl")
    write_jsonl(path, rows)
    with open(path, "rb") as fh:
        raw = fh.read()
    assert b"na\\u00efve" in raw  # non-ASCII is escaped on disk
    assert read_jsonl(path) == rows


def test_sample_row_round_trip():
    dataset = small_dataset()
    for sample_id, sample in zip(dataset.ids, dataset.samples):
        row = sample_to_row(sample_id, sample, dataset.split)
        back = row_to_sample(row)
        assert back.label == sample.label
        assert back.query == sample.query
        assert program_to_text(back.theory) == program_to_text(sample.theory)
        assert back.nl_query == sample.nl_query
        assert back.nl_context == sample.nl_context
        assert (back.proof_depth, back.proof_length) == (sample.proof_depth, sample.proof_length)


def test_dataset_save_load_round_trip(tmp_path):
    dataset = small_dataset()
    path = str(tmp_path / "data.jsonl")
    config = {"n_samples": 12, "rng_seed": 5}
    save_dataset(dataset, path, config, 5)
    loaded = load_dataset(path)
    assert loaded.ids == dataset.ids
    assert loaded.split == dataset.split
    assert len(loaded.samples) == len(dataset.samples)
    for got, want in zip(loaded.samples, dataset.samples):
        assert got.label == want.label
        assert got.nl_context == want.nl_context
    manifest = json.loads(open(manifest_path_for(path)).read())
    assert manifest["kind"] == "dataset"
    assert manifest["config_hash"] == canonical_config_hash(config)
    assert manifest["rng_seed"] == 5
    assert manifest["outputs"] == [path]
    assert manifest["incomplete"] is False


def test_load_dataset_rejects_unknown_schema(tmp_path):
    dataset = small_dataset()
    row = sample_to_row(dataset.ids[0], dataset.samples[0], "io")
    row["schema_version"] = 999
    path = str(tmp_path / "bad.jsonl")
    write_jsonl(path, [row])
    with pytest.raises(ValueError, match="schema"):
        load_dataset(path)


def _one_outcome():
    dataset = small_dataset()
    sample, sample_id = dataset.samples[0], dataset.ids[0]
    fact_sids = sorted(sid for sid, _ in sample.theory.facts)
    pset = PerturbationSet(
        ques_flip=True,
        sent_elim=frozenset(fact_sids[:1]),
        equiv_sub=(),
        log_prob=-1.25,
    )
    return apply_set(sample, pset, original_id=sample_id).with_victim(0.25)


def test_outcome_row_round_trip():
    outcome = _one_outcome()
    row = outcome_to_row(outcome)
    back = row_to_outcome(row)
    assert back.original_id == outcome.original_id
    assert back.perturbation == outcome.perturbation
    assert back.original_label == outcome.original_label
    assert back.original_proof_depth == outcome.original_proof_depth
    assert back.original_proof_length == outcome.original_proof_length
    assert back.solver_failed == outcome.solver_failed
    assert back.consistent == outcome.consistent
    assert back.victim_prob_true == outcome.victim_prob_true
    assert back.success == outcome.success
    assert back.perturbed.label == outcome.perturbed.label
    assert back.perturbed.nl_query == outcome.perturbed.nl_query
    assert back.perturbed.nl_context == outcome.perturbed.nl_context
    assert program_to_text(back.perturbed.theory) == program_to_text(outcome.perturbed.theory)


def test_outcome_row_is_json_serializable():
    row = outcome_to_row(_one_outcome())
    assert json.loads(dumps(row)) == json.loads(dumps(row))
    assert row["perturbed"]["id"].endswith("-adv")
    assert row["perturbed"]["split"] == "adv"
    assert row["sent_elim"] == sorted(row["sent_elim"])


def test_outcome_row_rejects_unknown_schema():
    row = outcome_to_row(_one_outcome())
    row["schema_version"] = 0
    with pytest.raises(ValueError, match="schema"):
        row_to_outcome(row)


def test_manifest_bytes_are_stable(tmp_path):
    a = str(tmp_path / "a.json")
    b = str(tmp_path / "b.json")
    config = {"k": [1, 2], "name": "run"}
    write_manifest(a, "attack", config, 7, ["out.jsonl"])
    write_manifest(b, "attack", config, 7, ["out.jsonl"])
    assert open(a, "rb").read() == open(b, "rb").read()


def test_manifest_sorts_outputs(tmp_path):
    path = str(tmp_path / "m.json")
    manifest = write_manifest(path, "x", {}, None, ["b.jsonl", "a.jsonl"])
    assert manifest["outputs"] == ["a.jsonl", "b.jsonl"]
    assert manifest["rng_seed"] is None


def test_checkpoint_round_trip(tmp_path):
    params = PolicyParameters.random(np.random.default_rng(3), hidden_size=4)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, {"kind": "policy", "params": params.to_json()})
    body = load_checkpoint(path)
    assert body["kind"] == "policy"
    restored = PolicyParameters.from_json(body["params"])
    assert np.array_equal(restored.flatten(), params.flatten())


def test_checkpoint_rejects_unknown_schema(tmp_path):
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, {"kind": "policy"})
    body = json.loads(open(path).read())
    body["schema_version"] = 99
    with open(path, "w") as fh:
        json.dump(body, fh)
    with pytest.raises(ValueError, match="checkpoint"):
        load_checkpoint(path)
