"""Command line interface.

Every subcommand reads options from flags, or from a JSON config file
given with --config; flags win over the file, the file wins over
defaults.  All writers are deterministic, so rerunning a command with
the same inputs and seed reproduces its outputs byte for byte.

Environment overrides: LOGICPROBE_ENDPOINT redirects any http victim
reference (or stands in when --victim is omitted), and LOGICPROBE_TIMEOUT
sets the HTTP client timeout in seconds.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import Any, Callable

from . import __version__
from .errors import LogicProbeError
from .generate import GenConfig, config_as_dict, generate_dataset
from .harness import AttackRunConfig, run_attack, stratified_asr, transferability
from .io import (
    canonical_config_hash,
    load_checkpoint,
    load_dataset,
    manifest_path_for,
    outcome_to_row,
    read_jsonl,
    row_to_outcome,
    row_to_sample,
    save_checkpoint,
    save_dataset,
    write_jsonl,
    write_manifest,
)
from .logic import entails, extract_proof
from .metrics import f1_sentence_overlap
from .nl import parse_query_sentence, parse_sentence
from .perturb import PerturbConfig, apply_set
from .policy import (
    FEATURE_NAMES,
    LearnedPolicy,
    PolicyParameters,
    RandomSelector,
    TrainConfig,
    UnigramSelector,
    compute_params,
    sample_perturbation,
    train,
)
from .seeding import rng_for
from .victims import resolve_victim

log = logging.getLogger("logicprobe")


def _int_tuple(value) -> tuple[int, ...]:
    parts = value.split(",") if isinstance(value, str) else value
    return tuple(int(p) for p in parts)


def _int_pair(value) -> tuple[int, int]:
    got = _int_tuple(value)
    if len(got) != 2:
        raise ValueError(f"expected two integers, got {got!r}")
    return got


_FLAG_ALIASES = {"in_path": "--in", "val_path": "--val"}


@dataclass(frozen=True)
class Opt:
    name: str
    convert: Callable[[Any], Any]
    default: Any = None
    required: bool = False
    help: str = ""

    @property
    def flag(self) -> str:
        return _FLAG_ALIASES.get(self.name, "--" + self.name.replace("_", "-"))


_SEED = Opt("rng_seed", int, 0, help="root seed; all randomness derives from it")
_CAPS = (
    Opt("max_sent_elim", int, 3, help="most sentences one set may eliminate"),
    Opt("max_equiv_sub", int, 3, help="most facts one set may substitute"),
    Opt("equiv_sub_body_size", int, 2, help="facts in a substitution rule body"),
)
_POLICY = (
    Opt("policy", str, "random", help="random | unigram | learned"),
    Opt("checkpoint", str, help="policy checkpoint path (learned policy)"),
)
_VICTIM = Opt("victim", str, help="oracle | overlap | echo | depth:N | http(s)://… | stdio:CMD")

COMMANDS: dict[str, dict] = {
    "generate": {
        "help": "sample a balanced entailment dataset and write JSONL",
        "opts": (
            Opt("out", str, required=True, help="output dataset JSONL path"),
            Opt("split", str, "train", help="split name stored in every row"),
            _SEED,
            Opt("n_samples", int, 1000, help="number of samples"),
            Opt("depth_range", _int_tuple, (0, 1, 2), help="proof depth buckets, e.g. 0,1,2"),
            Opt("facts_per_theory", _int_pair, (3, 6), help="inclusive fact count range"),
            Opt("rules_per_theory", _int_pair, (2, 5), help="inclusive rule count range"),
            Opt("naf_body_probability", float, 0.15, help="chance a rule body literal negates"),
            Opt("quantified_rule_probability", float, 0.5, help="chance a rule quantifies"),
        ),
    },
    "solve": {
        "help": "recompute labels and proof annotations for a dataset",
        "opts": (
            Opt("in_path", str, required=True, help="input dataset JSONL"),
            Opt("out", str, required=True, help="output JSONL of solver verdicts"),
        ),
    },
    "perturb": {
        "help": "draw one perturbation per input and write the outcomes",
        "opts": (
            Opt("in_path", str, required=True, help="input dataset JSONL"),
            Opt("out", str, required=True, help="output outcome JSONL"),
            _SEED,
            *_POLICY,
            *_CAPS,
        ),
    },
    "train": {
        "help": "train the learned policy against a frozen victim",
        "opts": (
            Opt("in_path", str, required=True, help="training dataset JSONL"),
            Opt("val_path", str, help="validation dataset JSONL (defaults to training set)"),
            Opt("out", str, required=True, help="checkpoint output path"),
            _VICTIM,
            _SEED,
            Opt("epochs", int, 5, help="training epochs"),
            Opt("batch_size", int, 8, help="inputs per gradient step"),
            Opt("learning_rate", float, 5e-6, help="ascent step size"),
            Opt("baseline_decay", float, 0.9, help="moving-average decay for the baseline"),
            Opt("hidden_size", int, 16, help="policy hidden layer width"),
            *_CAPS,
        ),
    },
    "attack": {
        "help": "attack a dataset and write a report plus outcomes",
        "opts": (
            Opt("in_path", str, required=True, help="input dataset JSONL"),
            _VICTIM,
            _SEED,
            *_POLICY,
            Opt("samples_per_input", int, 1, help="perturbation draws kept best-of-k"),
            Opt("report", str, help="report JSON path (stdout when omitted)"),
            Opt("outcomes", str, help="outcome JSONL path (skipped when omitted)"),
            *_CAPS,
        ),
    },
    "eval": {
        "help": "recompute attack metrics from saved outcomes",
        "opts": (
            Opt("in_path", str, required=True, help="original dataset JSONL"),
            Opt("outcomes", str, required=True, help="outcome JSONL path"),
            Opt("out", str, help="report JSON path (stdout when omitted)"),
            Opt("transfer_victim", str, help="victim reference to measure transfer against"),
        ),
    },
    "verify": {
        "help": "check dataset and outcome invariants with the solver",
        "opts": (
            Opt("in_path", str, required=True, help="dataset JSONL to verify"),
            Opt("outcomes", str, help="outcome JSONL to verify against the solver"),
        ),
    },
    "export": {
        "help": "export successful perturbed samples as a dataset",
        "opts": (
            Opt("outcomes", str, required=True, help="outcome JSONL path"),
            Opt("out", str, required=True, help="output dataset JSONL path"),
            Opt("split", str, "adv", help="split name stored in exported rows"),
        ),
    },
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logicprobe",
        description="logically consistent adversarial attacks on entailment scorers",
    )
    parser.add_argument("--version", action="version", version=f"logicprobe {__version__}")
    parser.add_argument(
        "--help-json", action="store_true", help="print a machine-readable option schema"
    )
    parser.add_argument(
        "--log-level",
        default="info",
        choices=("debug", "info", "warning", "error"),
        help="stderr logging threshold",
    )
    subs = parser.add_subparsers(dest="command")
    for name, spec in COMMANDS.items():
        sub = subs.add_parser(name, help=spec["help"], description=spec["help"])
        sub.add_argument("--config", help="JSON file with option defaults")
        for opt in spec["opts"]:
            sub.add_argument(opt.flag, dest=opt.name, default=None, help=opt.help)
    return parser


def help_schema() -> dict:
    return {
        "program": "logicprobe",
        "version": __version__,
        "commands": {
            name: {
                "help": spec["help"],
                "options": [
                    {
                        "flag": opt.flag,
                        "default": list(opt.default) if isinstance(opt.default, tuple) else opt.default,
                        "required": opt.required,
                        "help": opt.help,
                    }
                    for opt in spec["opts"]
                ],
            }
            for name, spec in COMMANDS.items()
        },
    }


def _gather(args: argparse.Namespace, command: str) -> dict:
    """Merge flag values over config-file values over declared defaults."""
    spec = COMMANDS[command]
    known = {opt.name: opt for opt in spec["opts"]}
    file_values: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_values = json.load(fh)
        unknown = set(file_values) - set(known)
        if unknown:
            raise ValueError(f"unknown config keys for {command}: {sorted(unknown)}")
    merged = {}
    for name, opt in known.items():
        value = getattr(args, name, None)
        if value is None:
            value = file_values.get(name, opt.default)
        if value is None:
            if opt.required:
                raise ValueError(f"{command} needs {opt.flag} (or {name!r} in --config)")
            merged[name] = None
            continue
        merged[name] = opt.convert(value)
    return merged


def _json_safe(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def _config_dict(merged: dict) -> dict:
    return {k: _json_safe(v) for k, v in merged.items()}


def _victim_from_ref(ref: str | None):
    endpoint = os.environ.get("LOGICPROBE_ENDPOINT")
    if endpoint and (ref is None or ref.startswith(("http://", "https://"))):
        ref = endpoint
    if ref is None:
        raise ValueError("no victim given (use --victim or LOGICPROBE_ENDPOINT)")
    timeout_env = os.environ.get("LOGICPROBE_TIMEOUT")
    timeout = float(timeout_env) if timeout_env else None
    return resolve_victim(ref, timeout=timeout)


def _build_policy(name: str, checkpoint: str | None, dataset):
    if name == "random":
        return RandomSelector()
    if name == "unigram":
        return UnigramSelector.fit(dataset.samples)
    if name == "learned":
        if not checkpoint:
            raise ValueError("learned policy needs --checkpoint")
        body = load_checkpoint(checkpoint)
        if body.get("kind") != "policy":
            raise ValueError(f"not a policy checkpoint: {checkpoint}")
        return LearnedPolicy(PolicyParameters.from_json(body["params"]))
    raise ValueError(f"unknown policy {name!r}")


def _perturb_config(cfg: dict) -> PerturbConfig:
    return PerturbConfig(
        max_sent_elim=cfg["max_sent_elim"],
        max_equiv_sub=cfg["max_equiv_sub"],
        equiv_sub_body_size=cfg["equiv_sub_body_size"],
    )


def _write_train_log(path: str, result) -> None:
    """One CSV row per gradient step; val_asr fills in on each epoch's last row."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=("epoch", "batch", "mean_advantage", "val_asr"))
        writer.writeheader()
        epoch0 = result.history[0]
        writer.writerow({"epoch": 0, "batch": "", "mean_advantage": "", "val_asr": epoch0["val_asr"]})
        for row in result.batch_log:
            writer.writerow({**{"val_asr": ""}, **row})


def _write_report(report: dict, path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, ensure_ascii=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = _gather(args, "generate")
    gen = GenConfig(
        rng_seed=cfg["rng_seed"],
        n_samples=cfg["n_samples"],
        depth_range=cfg["depth_range"],
        facts_per_theory=cfg["facts_per_theory"],
        rules_per_theory=cfg["rules_per_theory"],
        naf_body_probability=cfg["naf_body_probability"],
        quantified_rule_probability=cfg["quantified_rule_probability"],
    )
    dataset = generate_dataset(gen, cfg["split"])
    manifest_config = dict(config_as_dict(gen), split=cfg["split"])
    save_dataset(dataset, cfg["out"], manifest_config, gen.rng_seed)
    log.info("wrote %d samples to %s", len(dataset), cfg["out"])
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _gather(args, "solve")
    rows = read_jsonl(cfg["in_path"])
    verdicts = []
    for row in rows:
        sample = row_to_sample(row)
        info = extract_proof(sample.theory, sample.query)
        verdicts.append(
            {
                "id": row["id"],
                "label": entails(sample.theory, sample.query),
                "proof_depth": info.depth,
                "proof_length": info.length,
            }
        )
    write_jsonl(cfg["out"], verdicts)
    write_manifest(manifest_path_for(cfg["out"]), "solve", _config_dict(cfg), None, [cfg["out"]])
    log.info("solved %d rows from %s", len(verdicts), cfg["in_path"])
    return 0


def cmd_perturb(args: argparse.Namespace) -> int:
    cfg = _gather(args, "perturb")
    dataset = load_dataset(cfg["in_path"])
    policy = _build_policy(cfg["policy"], cfg["checkpoint"], dataset)
    perturb_cfg = _perturb_config(cfg)
    out_rows = []
    for i, (sample, sample_id) in enumerate(zip(dataset.samples, dataset.ids)):
        rng = rng_for(cfg["rng_seed"], "attack", i, 0)
        params = compute_params(policy, sample)
        pset = sample_perturbation(params, perturb_cfg, rng)
        outcome = apply_set(sample, pset, perturb_cfg, original_id=sample_id)
        out_rows.append(outcome_to_row(outcome))
    write_jsonl(cfg["out"], out_rows)
    write_manifest(
        manifest_path_for(cfg["out"]), "perturb", _config_dict(cfg), cfg["rng_seed"], [cfg["out"]]
    )
    log.info("perturbed %d samples from %s", len(out_rows), cfg["in_path"])
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _gather(args, "train")
    dataset = load_dataset(cfg["in_path"])
    val = load_dataset(cfg["val_path"]) if cfg["val_path"] else None
    victim = _victim_from_ref(cfg["victim"])
    tc = TrainConfig(
        rng_seed=cfg["rng_seed"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        baseline_decay=cfg["baseline_decay"],
        perturb=_perturb_config(cfg),
    )
    initial = PolicyParameters.zeros(hidden_size=cfg["hidden_size"])
    result = train(initial, dataset.samples, victim, tc, val.samples if val else None)
    save_checkpoint(
        cfg["out"],
        {
            "kind": "policy",
            "params": result.params.to_json(),
            "feature_names": list(FEATURE_NAMES),
            "config_hash": canonical_config_hash(_config_dict(cfg)),
            "history": list(result.history),
            "best_epoch": result.best_epoch,
            "best_val_asr": result.best_val_asr,
            "victim": victim.name,
        },
    )
    log_path = cfg["out"] + ".log.csv"
    _write_train_log(log_path, result)
    write_manifest(
        manifest_path_for(cfg["out"]),
        "train",
        _config_dict(cfg),
        cfg["rng_seed"],
        [cfg["out"], log_path],
    )
    log.info(
        "trained %d epochs; best validation attack rate %.4f at epoch %d",
        tc.epochs,
        result.best_val_asr,
        result.best_epoch,
    )
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    cfg = _gather(args, "attack")
    dataset = load_dataset(cfg["in_path"])
    victim = _victim_from_ref(cfg["victim"])
    policy = _build_policy(cfg["policy"], cfg["checkpoint"], dataset)
    run_cfg = AttackRunConfig(
        rng_seed=cfg["rng_seed"],
        samples_per_input=cfg["samples_per_input"],
        perturb=_perturb_config(cfg),
    )
    report, outcomes = run_attack(policy, dataset, victim, run_cfg)
    if cfg["outcomes"]:
        write_jsonl(cfg["outcomes"], [outcome_to_row(o) for o in outcomes])
        write_manifest(
            manifest_path_for(cfg["outcomes"]),
            "attack",
            _config_dict(cfg),
            cfg["rng_seed"],
            [cfg["outcomes"]],
        )
    _write_report(report.as_dict(), cfg["report"])
    if cfg["report"]:
        write_manifest(
            manifest_path_for(cfg["report"]),
            "attack-report",
            _config_dict(cfg),
            cfg["rng_seed"],
            [cfg["report"]],
        )
    log.info(
        "attacked %d inputs against %s: success rate %.4f",
        report.n_inputs,
        report.victim_name,
        report.asr,
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _gather(args, "eval")
    dataset = load_dataset(cfg["in_path"])
    by_id = dict(zip(dataset.ids, dataset.samples))
    outcomes = [row_to_outcome(row) for row in read_jsonl(cfg["outcomes"])]
    missing = [o.original_id for o in outcomes if o.original_id not in by_id]
    if missing:
        raise ValueError(f"outcomes reference ids missing from the dataset: {missing[:5]}")
    f1s = []
    for outcome in outcomes:
        original = by_id[outcome.original_id]
        f1s.append(
            f1_sentence_overlap(
                (original.nl_query, *original.nl_context),
                (outcome.perturbed.nl_query, *outcome.perturbed.nl_context),
            )
        )
    n = len(outcomes)
    report = {
        "n_outcomes": n,
        "asr": sum(o.success for o in outcomes) / n if n else 0.0,
        "f1_mean": sum(f1s) / n if n else 0.0,
        "solver_failure_rate": sum(o.solver_failed for o in outcomes) / n if n else 0.0,
        "asr_by_proof_length": stratified_asr(outcomes, "length"),
        "asr_by_proof_depth": stratified_asr(outcomes, "depth"),
    }
    if cfg["transfer_victim"]:
        victim = _victim_from_ref(cfg["transfer_victim"])
        report["transferability"] = {victim.name: transferability(outcomes, victim)}
    _write_report(report, cfg["out"])
    log.info("evaluated %d outcomes from %s", n, cfg["outcomes"])
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = _gather(args, "verify")
    rows = read_jsonl(cfg["in_path"])
    violations = 0
    for row in rows:
        sample = row_to_sample(row)
        problems = []
        if entails(sample.theory, sample.query) != sample.label:
            problems.append("label")
        info = extract_proof(sample.theory, sample.query)
        if (info.depth, info.length) != (sample.proof_depth, sample.proof_length):
            problems.append("proof")
        try:
            if parse_query_sentence(sample.nl_query) != sample.query:
                problems.append("query text")
            for line, sentence in zip(sample.nl_context, sample.theory.sentences):
                if parse_sentence(line) != sentence.clause:
                    problems.append("context text")
                    break
        except LogicProbeError:
            problems.append("unparseable text")
        if problems:
            violations += 1
            log.warning("row %s violates: %s", row.get("id"), ", ".join(problems))
    checked_outcomes = 0
    if cfg["outcomes"]:
        for row in read_jsonl(cfg["outcomes"]):
            outcome = row_to_outcome(row)
            checked_outcomes += 1
            if outcome.solver_failed:
                if outcome.success:
                    violations += 1
                    log.warning("outcome %s: success despite solver failure", outcome.original_id)
                continue
            got = outcome.perturbed
            if entails(got.theory, got.query) != got.label:
                violations += 1
                log.warning("outcome %s: stored label disagrees with solver", outcome.original_id)
    summary = {
        "rows": len(rows),
        "outcomes": checked_outcomes,
        "violations": violations,
    }
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return 0 if violations == 0 else 1


def cmd_export(args: argparse.Namespace) -> int:
    from .harness import export_rows

    cfg = _gather(args, "export")
    outcomes = [row_to_outcome(row) for row in read_jsonl(cfg["outcomes"])]
    rows = export_rows(outcomes, cfg["split"])
    write_jsonl(cfg["out"], rows)
    write_manifest(manifest_path_for(cfg["out"]), "export", _config_dict(cfg), None, [cfg["out"]])
    log.info("exported %d adversarial rows to %s", len(rows), cfg["out"])
    return 0


_HANDLERS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "perturb": cmd_perturb,
    "train": cmd_train,
    "attack": cmd_attack,
    "eval": cmd_eval,
    "verify": cmd_verify,
    "export": cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.help_json:
        sys.stdout.write(json.dumps(help_schema(), indent=2, sort_keys=True) + "\n")
        return 0
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        log.error("bad configuration: %s", exc)
        return 2
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc)
        return 2
    except LogicProbeError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
