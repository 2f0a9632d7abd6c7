"""Command-line pipeline with reproducible run manifests.

Eight subcommands bind the library end to end: ``split``, ``verify``,
``featurize``, ``induce``, ``train``, ``evaluate``, ``explain``, ``score``.
Settings come from a TOML config file with flag overrides (flags win), and
all randomness fans out from one master seed through stage-name hashing,
so re-running a command reproduces its outputs byte for byte.

Exit codes: 0 success, 1 data violations (verify), 2 usage errors,
3 runtime errors.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .core import (DatasetBundle, Label, PairExample, Role, Split,
                   SplitAssignment, Task, derive_seed)
from .errors import PairforgeError
from .features import (DescriptorConfig, FeatureContext, signals_from_tsv,
                       signals_to_tsv)
from .ingest import (load_embedding_table, parse_annotation_table,
                     parse_fasta, parse_pair_table)
from .metrics import classification_metrics, confusion_from_scores
from .predict import (ModelSpec, TrainConfig, TrainedModel,
                      default_attribution_groups, ensemble_predict,
                      group_attribution, load_checkpoint, save_checkpoint,
                      train_bag, train_model)
from .rules import (SignalTable, SparseConfig, default_exclusion_policy,
                    generate_candidates, induce_greedy, induce_hybrid,
                    induce_sparse_logistic, parse_ruleset, render_ruleset,
                    ruleset_to_json, score_table)
from .split import (NegativeSynthesisConfig, assign_proteins, make_fold_plan,
                    route_pairs, split_manifest, synthesize_negatives)
from .verify import verify_bundle

CORPUS_FILES = {
    "proteins": "proteins.fasta",
    "pairs": "pairs.tsv",
    "embeddings": "embeddings.tsv",
    "annotations": "annotations.tsv",
}

SPLITS = (Split.TRAIN, Split.VALIDATION, Split.TEST)

DEFAULT_SETTINGS: Dict[str, object] = {
    "seed": 0,
    "task": "host_host",
    "strategy": "hybrid",
    "folds": 1,
    "split": {"ratios": [0.70, 0.10, 0.20]},
    "negatives": {
        "synthesize": True,
        "ratio": 1.0,
        "compartment_disjoint": False,
        "co_complex": False,
        "co_complex_pairs": [],
    },
    "features": {"max_lag": 5, "cross_terms": False},
    "induce": {
        "objective": "mcc",
        "top_k_pairs": 20,
        "broad_rule_cap": 0.90,
        "max_rules": 60,
        "path_points": 50,
        "lambda_min_ratio": 1e-3,
        "max_sweeps": 10_000,
        "tol": 1e-6,
    },
    "model": {
        "architecture": "pair_mlp",
        "hidden_sizes": [64, 32],
        "activation": "relu",
        "loss": "bce",
        "focal_gamma": 2.0,
        "tower_dim": 32,
        "temperature": 1.0,
        "symmetrize_scores": False,
    },
    "train": {
        "learning_rate": 1e-3,
        "weight_decay": 1e-4,
        "batch_size": 32,
        "max_epochs": 100,
        "patience": 10,
        "class_weighting": False,
        "hard_negative_mining": False,
        "mining_floor": 0.7,
        "mining_multiplier": 2.0,
        "pu_downweighting": False,
        "pu_floor": 0.9,
        "pu_factor": 0.5,
        "bag_count": 3,
    },
    "evaluate": {"split": "test", "threshold": None},
    "explain": {"split": "test", "instances": 8, "mode": "exact",
                "permutations": 256},
}


# ---------------------------------------------------------------------------
# Settings


def _deep_update(base: Dict, extra: Mapping) -> Dict:
    for key, value in extra.items():
        if (key in base and isinstance(base[key], dict)
                and isinstance(value, Mapping)):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _check_keys(settings: Mapping, reference: Mapping, trail: str = "") -> None:
    for key, value in settings.items():
        if key not in reference:
            raise PairforgeError("BAD_CONFIG",
                                 f"unknown setting '{trail}{key}'")
        if isinstance(reference[key], dict) and isinstance(value, Mapping):
            _check_keys(value, reference[key], trail=f"{trail}{key}.")


def load_settings(args: argparse.Namespace) -> Dict:
    """Defaults, overlaid by the config file, overlaid by flags."""
    settings = copy.deepcopy(DEFAULT_SETTINGS)
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            loaded = tomllib.load(fh)
        _check_keys(loaded, DEFAULT_SETTINGS)
        _deep_update(settings, loaded)
    for flag in ("seed", "task", "strategy", "folds"):
        value = getattr(args, flag, None)
        if value is not None:
            settings[flag] = value
    return settings


def settings_digest(command: str, settings: Mapping) -> str:
    canonical = json.dumps({"command": command, "settings": settings},
                           sort_keys=True)
    return "sha256:" + hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Run manifests


@dataclass
class RunManifest:
    command: str
    config_digest: str
    tool_version: str
    master_seed: int
    stage_seeds: Dict[str, int]
    inputs: Dict[str, str]
    outputs: Dict[str, str]
    duration_seconds: float

    def to_json(self) -> str:
        payload = {
            "command": self.command,
            "config_digest": self.config_digest,
            "tool_version": self.tool_version,
            "seeds": {"master": self.master_seed, "stages": self.stage_seeds},
            "inputs": self.inputs,
            "outputs": self.outputs,
            "duration_seconds": self.duration_seconds,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def parse_manifest(text: str) -> RunManifest:
    data = json.loads(text)
    return RunManifest(command=data["command"],
                       config_digest=data["config_digest"],
                       tool_version=data["tool_version"],
                       master_seed=data["seeds"]["master"],
                       stage_seeds=dict(data["seeds"]["stages"]),
                       inputs=dict(data["inputs"]),
                       outputs=dict(data["outputs"]),
                       duration_seconds=data["duration_seconds"])


def _digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


class Run:
    """Tracks the inputs, outputs, and seeds of one command invocation.

    Inputs and outputs are recorded by file name (not path), so manifests
    from runs in different directories compare equal when contents match.
    """

    def __init__(self, command: str, out_dir: Path, settings: Mapping):
        self.command = command
        self.out_dir = out_dir
        self.settings = settings
        self.master_seed = int(settings["seed"])
        self.stage_seeds: Dict[str, int] = {}
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        out_dir.mkdir(parents=True, exist_ok=True)

    def seed_for(self, stage: str) -> int:
        seed = derive_seed(self.master_seed, stage)
        self.stage_seeds[stage] = seed
        return seed

    def read_bytes(self, path) -> bytes:
        data = Path(path).read_bytes()
        self.inputs[Path(path).name] = _digest(data)
        return data

    def read_text(self, path) -> str:
        return self.read_bytes(path).decode("utf-8")

    def read_array(self, path) -> np.ndarray:
        return np.load(io.BytesIO(self.read_bytes(path)))

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        path.write_bytes(data)
        self.outputs[name] = _digest(data)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_json(self, name: str, payload) -> Path:
        return self.write_text(name,
                               json.dumps(payload, sort_keys=True, indent=2)
                               + "\n")

    def write_array(self, name: str, values: np.ndarray) -> Path:
        buffer = io.BytesIO()
        np.save(buffer, values)
        return self.write_bytes(name, buffer.getvalue())

    def finish(self, duration: float) -> Path:
        manifest = RunManifest(
            command=self.command,
            config_digest=settings_digest(self.command, self.settings),
            tool_version=__version__,
            master_seed=self.master_seed,
            stage_seeds=self.stage_seeds,
            inputs=self.inputs,
            outputs=self.outputs,
            duration_seconds=duration,
        )
        path = self.out_dir / f"{self.command}_manifest.json"
        path.write_text(manifest.to_json(), encoding="utf-8")
        return path


# ---------------------------------------------------------------------------
# Bundle (de)serialization


def bundle_to_json(bundle: DatasetBundle) -> str:
    if bundle.assignment is None:
        raise PairforgeError("MISSING_ASSIGNMENT",
                             "bundle has no protein assignment")
    assignment = bundle.assignment
    payload = {
        "task": bundle.task.value,
        "seed": bundle.seed,
        "ratios": list(assignment.ratios),
        "assignment": {pid: split.value
                       for pid, split in sorted(assignment.mapping.items())},
        "roles": {pid: role.value
                  for pid, role in sorted(assignment.roles.items())},
        "splits": {
            split.value: [[p.a_id, p.b_id, p.label.value, p.source]
                          for p in bundle.pairs(split)]
            for split in SPLITS
        },
        "sources": list(bundle.sources),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def bundle_from_json(text: str) -> DatasetBundle:
    data = json.loads(text)
    assignment = SplitAssignment(
        mapping={pid: Split(value) for pid, value in data["assignment"].items()},
        ratios=tuple(data["ratios"]),
        roles={pid: Role(value) for pid, value in data["roles"].items()},
    )
    splits = {
        split: tuple(PairExample(a_id=a, b_id=b, label=Label(label),
                                 source=source)
                     for a, b, label, source in data["splits"][split.value])
        for split in SPLITS
    }
    return DatasetBundle(task=Task(data["task"]), splits=splits,
                         seed=data["seed"], sources=tuple(data["sources"]),
                         assignment=assignment)


# ---------------------------------------------------------------------------
# Shared loading helpers


def _load_corpus(run: Run, corpus_dir: str, task: Task):
    corpus = Path(corpus_dir)
    records = parse_fasta(run.read_text(corpus / CORPUS_FILES["proteins"]))
    pairs = parse_pair_table(run.read_text(corpus / CORPUS_FILES["pairs"]),
                             task)
    embeddings = load_embedding_table(
        run.read_text(corpus / CORPUS_FILES["embeddings"]))
    annotations = parse_annotation_table(
        run.read_text(corpus / CORPUS_FILES["annotations"]))
    return records, pairs, embeddings, annotations


def _descriptor_config(settings: Mapping) -> DescriptorConfig:
    feat = settings["features"]
    return DescriptorConfig(max_lag=int(feat["max_lag"]),
                            include_cross_terms=bool(feat["cross_terms"]))


def _context(records, embeddings, annotations, bundle: DatasetBundle,
             settings: Mapping, task: Task) -> FeatureContext:
    train_positives = [p for p in bundle.pairs(Split.TRAIN)
                       if p.label is Label.POSITIVE]
    return FeatureContext(records, embeddings, annotations,
                          train_positives=train_positives,
                          cfg=_descriptor_config(settings), task=task)


def _labels(pairs: Sequence[PairExample]) -> np.ndarray:
    return np.array([1 if p.label is Label.POSITIVE else 0 for p in pairs],
                    dtype=np.int64)


def _signal_table(run: Run, features_dir: str, split: Split
                  ) -> Tuple[SignalTable, List[PairExample]]:
    text = run.read_text(Path(features_dir) / f"signals_{split.value}.tsv")
    matrix, names, pairs = signals_from_tsv(text)
    return SignalTable(matrix=matrix, labels=_labels(pairs), names=names), pairs


def _model_spec(settings: Mapping, seed: int) -> ModelSpec:
    model = settings["model"]
    return ModelSpec(architecture=model["architecture"],
                     hidden_sizes=tuple(int(h) for h in model["hidden_sizes"]),
                     activation=model["activation"],
                     loss=model["loss"],
                     focal_gamma=float(model["focal_gamma"]),
                     tower_dim=int(model["tower_dim"]),
                     temperature=float(model["temperature"]),
                     symmetrize_scores=bool(model["symmetrize_scores"]),
                     seed=seed)


def _train_config(settings: Mapping) -> TrainConfig:
    return TrainConfig(**settings["train"])


def load_scorer(run: Run, path) -> Tuple[List[TrainedModel], float]:
    """A checkpoint or an ensemble listing; returns members + threshold."""
    path = Path(path)
    if path.suffix == ".json":
        listing = json.loads(run.read_text(path))
        models = []
        for name in listing["members"]:
            member = path.parent / name
            run.inputs[member.name] = _digest(member.read_bytes())
            models.append(load_checkpoint(member))
        return models, float(listing["threshold"])
    run.read_bytes(path)  # record the digest
    model = load_checkpoint(path)
    return [model], model.threshold


def _scores_tsv(pairs: Sequence[PairExample], scores: np.ndarray,
                threshold: float) -> str:
    lines = ["a_id\tb_id\tlabel\tscore\tprediction"]
    for pair, score in zip(pairs, scores):
        label = "1" if pair.label is Label.POSITIVE else "0"
        prediction = "1" if score > threshold else "0"
        lines.append(f"{pair.a_id}\t{pair.b_id}\t{label}"
                     f"\t{float(score)!r}\t{prediction}")
    return "\n".join(lines) + "\n"


def _parse_scores_tsv(text: str) -> Tuple[np.ndarray, np.ndarray]:
    lines = [line for line in text.splitlines() if line]
    if not lines or lines[0].split("\t")[:4] != ["a_id", "b_id", "label",
                                                 "score"]:
        raise PairforgeError("MALFORMED_ROW", "not a scored pair table")
    labels, scores = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split("\t")
        if len(cols) < 4 or cols[2] not in ("0", "1"):
            raise PairforgeError("MALFORMED_ROW",
                                 f"bad scored row at line {lineno}",
                                 line=lineno)
        labels.append(int(cols[2]))
        scores.append(float(cols[3]))
    return np.array(labels, dtype=np.int64), np.array(scores)


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_split(run: Run, args, settings) -> int:
    task = Task(settings["task"])
    records, pairs, _, annotations = _load_corpus(run, args.corpus, task)
    ratios = tuple(float(r) for r in settings["split"]["ratios"])
    assignment = assign_proteins(records, ratios=ratios,
                                 seed=run.seed_for("assign"))
    bundle = route_pairs(pairs, assignment, task=task, seed=run.master_seed)
    neg = settings["negatives"]
    if neg["synthesize"]:
        cfg = NegativeSynthesisConfig(
            ratio=float(neg["ratio"]),
            require_compartment_disjoint=bool(neg["compartment_disjoint"]),
            exclude_co_complex=bool(neg["co_complex"]),
            co_complex_pairs=tuple((a, b) for a, b in neg["co_complex_pairs"]),
            seed=run.seed_for("negatives"),
        )
        bundle = synthesize_negatives(bundle, annotations, cfg)
    run.write_text("bundle.json", bundle_to_json(bundle))
    run.write_json("split_summary.json", split_manifest(bundle))
    counts = assignment.counts()
    print("split: proteins "
          + "/".join(str(counts[s]) for s in SPLITS)
          + ", pairs "
          + " ".join(f"{s.value}={len(bundle.pairs(s))}" for s in SPLITS))
    return 0


def _cmd_verify(run: Run, args, settings) -> int:
    bundle = bundle_from_json(run.read_text(args.bundle))
    report = verify_bundle(bundle, bundle.assignment)
    run.write_json("verification.json", report.to_dict())
    errors = [v for v in report.violations if v.severity == "error"]
    warnings = [v for v in report.violations if v.severity == "warning"]
    print(f"verify: {'passed' if report.passed else 'FAILED'} "
          f"({len(errors)} errors, {len(warnings)} warnings)")
    for violation in errors:
        print(json.dumps(violation.to_dict(), sort_keys=True))
    return 0 if report.passed else 1


def _cmd_featurize(run: Run, args, settings) -> int:
    task = Task(settings["task"])
    records, _, embeddings, annotations = _load_corpus(run, args.corpus, task)
    bundle = bundle_from_json(run.read_text(args.bundle))
    ctx = _context(records, embeddings, annotations, bundle, settings, task)
    names: List[str] = []
    for split in SPLITS:
        pairs = bundle.pairs(split)
        matrix, names = ctx.signal_matrix(pairs)
        run.write_text(f"signals_{split.value}.tsv",
                       signals_to_tsv(matrix, names, pairs))
        run.write_array(f"tensor_{split.value}.npy", ctx.tensor_matrix(pairs))
        run.write_array(f"labels_{split.value}.npy", _labels(pairs))
    run.write_json("feature_meta.json", {
        "task": task.value,
        "pair_dim": ctx.pair_dim,
        "embedding_dim": embeddings.dim,
        "max_lag": ctx.cfg.max_lag,
        "signal_names": names,
    })
    print(f"featurize: pair_dim={ctx.pair_dim}, "
          f"signals={len(names)}, splits="
          + " ".join(f"{s.value}={len(bundle.pairs(s))}" for s in SPLITS))
    return 0


def _cmd_induce(run: Run, args, settings) -> int:
    task = Task(settings["task"])
    strategy = settings["strategy"]
    section = settings["induce"]
    train_table, _ = _signal_table(run, args.features, Split.TRAIN)
    val_table, _ = _signal_table(run, args.features, Split.VALIDATION)
    policy = replace(default_exclusion_policy(task),
                     broad_rule_cap=float(section["broad_rule_cap"]))
    candidates = generate_candidates(train_table, policy,
                                     top_k_and2=int(section["top_k_pairs"]))
    provenance = {"seed": run.master_seed, "requested_strategy": strategy}
    objective = section["objective"]
    sparse_cfg = SparseConfig(max_rules=int(section["max_rules"]),
                              path_points=int(section["path_points"]),
                              lambda_min_ratio=float(section["lambda_min_ratio"]),
                              max_sweeps=int(section["max_sweeps"]),
                              tol=float(section["tol"]),
                              objective=objective)
    if strategy == "greedy":
        ruleset = induce_greedy(candidates, train_table, val_table,
                                objective=objective, task=task,
                                provenance=provenance)
    elif strategy == "sparse":
        ruleset = induce_sparse_logistic(candidates, train_table, val_table,
                                         cfg=sparse_cfg, task=task,
                                         provenance=provenance)
    else:
        ruleset = induce_hybrid(candidates, train_table, val_table,
                                cfg=sparse_cfg, objective=objective,
                                task=task, provenance=provenance)
    run.write_text("ruleset.json", ruleset_to_json(ruleset))
    run.write_text("ruleset.txt", render_ruleset(ruleset))
    score = ruleset.metrics.get(f"validation_{objective}")
    print(f"induce: strategy={ruleset.strategy} rules={len(ruleset.rules)} "
          f"validation_{objective}={score:.4f}")
    return 0


def _write_ensemble(run: Run, models: Sequence[TrainedModel],
                    names: Sequence[str], threshold: float) -> None:
    for name, model in zip(names, models):
        save_checkpoint(model, run.out_dir / name)
        run.outputs[name] = _digest((run.out_dir / name).read_bytes())
        sidecar = f"{name}.history.tsv"
        run.outputs[sidecar] = _digest((run.out_dir / sidecar).read_bytes())
    if len(models) > 1:
        run.write_json("ensemble.json", {
            "members": list(names),
            "threshold": threshold,
        })


def _cmd_train(run: Run, args, settings) -> int:
    task = Task(settings["task"])
    cfg = _train_config(settings)
    folds = int(settings["folds"])
    if folds <= 1:
        features = Path(args.features)
        x_train = run.read_array(features / "tensor_train.npy")
        y_train = run.read_array(features / "labels_train.npy")
        x_val = run.read_array(features / "tensor_validation.npy")
        y_val = run.read_array(features / "labels_validation.npy")
        spec = _model_spec(settings, seed=run.seed_for("model"))
        if cfg.bag_count == 1:
            model = train_model(spec, cfg, x_train, y_train, x_val, y_val)
            _write_ensemble(run, [model], ["model.pfck"], model.threshold)
            models = [model]
        else:
            models, threshold = train_bag(spec, cfg, x_train, y_train,
                                          x_val, y_val)
            names = [f"model_bag{i}.pfck" for i in range(len(models))]
            _write_ensemble(run, models, names, threshold)
    else:
        records, _, embeddings, annotations = _load_corpus(run, args.corpus,
                                                           task)
        bundle = bundle_from_json(run.read_text(args.bundle))
        plan = make_fold_plan(bundle.assignment, folds,
                              seed=run.seed_for("folds"))
        models = []
        for fold in range(plan.k):
            fold_bundle = route_pairs(bundle.all_pairs(),
                                      plan.assignment_for(fold), task=task,
                                      seed=run.master_seed)
            ctx = _context(records, embeddings, annotations, fold_bundle,
                           settings, task)
            train_pairs = fold_bundle.pairs(Split.TRAIN)
            val_pairs = fold_bundle.pairs(Split.VALIDATION)
            spec = _model_spec(settings, seed=run.seed_for(f"fold:{fold}"))
            models.append(train_model(spec, cfg,
                                      ctx.tensor_matrix(train_pairs),
                                      _labels(train_pairs),
                                      ctx.tensor_matrix(val_pairs),
                                      _labels(val_pairs)))
        threshold = float(np.mean([m.threshold for m in models]))
        names = [f"model_fold{i}.pfck" for i in range(len(models))]
        _write_ensemble(run, models, names, threshold)
    best = [max(h["val_mcc"] for h in m.history) if m.history else float("nan")
            for m in models]
    print("train: " + " ".join(f"model{i}_val_mcc={b:.4f}"
                               for i, b in enumerate(best)))
    return 0


def _cmd_evaluate(run: Run, args, settings) -> int:
    section = settings["evaluate"]
    override = section["threshold"]
    if args.scores:
        labels, scores = _parse_scores_tsv(run.read_text(args.scores))
        threshold = 0.5 if override is None else float(override)
        source = Path(args.scores).name
    else:
        split = Split(section["split"])
        features = Path(args.features)
        if args.ruleset:
            ruleset = parse_ruleset(run.read_text(args.ruleset))
            table, pairs = _signal_table(run, args.features, split)
            scores = score_table(ruleset, table)
            threshold = ruleset.decision_threshold
            source = Path(args.ruleset).name
        else:
            models, threshold = load_scorer(run, args.model)
            x = run.read_array(features / f"tensor_{split.value}.npy")
            _, pairs = _signal_table(run, args.features, split)
            scores = ensemble_predict(models, x)
            source = Path(args.model).name
        if override is not None:
            threshold = float(override)
        name = f"scores_{split.value}.tsv"
        path = run.write_text(name, _scores_tsv(pairs, scores, threshold))
        # metrics always come from the scored file on disk
        labels, scores = _parse_scores_tsv(path.read_text(encoding="utf-8"))
    cm = confusion_from_scores(labels, scores, threshold)
    metrics = classification_metrics(cm)
    run.write_json("evaluation.json", {
        "source": source,
        "threshold": threshold,
        "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn},
        "metrics": metrics,
    })
    print("evaluate: " + " ".join(f"{k}={v:.4f}"
                                  for k, v in sorted(metrics.items())))
    return 0


def _merge_attributions(reports) -> Dict[str, object]:
    """Average member attributions; Shapley is linear in the value game."""
    names = reports[0].group_names
    values = np.mean([r.values for r in reports], axis=0)
    merged = {
        "mode": reports[0].mode,
        "baseline": reports[0].baseline,
        "instances": int(values.shape[0]),
        "efficiency_residual": max(r.efficiency_residual for r in reports),
        "groups": {
            name: {
                "mean_abs": float(np.abs(values[:, g]).mean()),
                "signed_mean": float(values[:, g].mean()),
            }
            for g, name in enumerate(names)
        },
    }
    if reports[0].standard_error is not None:
        for name in names:
            merged["groups"][name]["standard_error"] = float(np.mean(
                [r.standard_error[name] for r in reports]))
    return merged


def _cmd_explain(run: Run, args, settings) -> int:
    section = settings["explain"]
    split = Split(section["split"])
    features = Path(args.features)
    meta = json.loads(run.read_text(features / "feature_meta.json"))
    instances = run.read_array(features / f"tensor_{split.value}.npy")
    if instances.shape[0] == 0:
        raise PairforgeError("EMPTY_INSTANCES", f"no {split.value} pairs")
    count = min(int(section["instances"]), instances.shape[0])
    instances = instances[:count]
    baseline = run.read_array(features / "tensor_train.npy").mean(axis=0)
    groups = default_attribution_groups(int(meta["embedding_dim"]),
                                        max_lag=int(meta["max_lag"]))
    models, _ = load_scorer(run, args.model)
    reports = [group_attribution(model, instances, groups,
                                 mode=section["mode"], baseline=baseline,
                                 permutations=int(section["permutations"]),
                                 seed=run.master_seed)
               for model in models]
    merged = _merge_attributions(reports)
    merged["split"] = split.value
    run.write_json("attribution.json", merged)
    ranked = sorted(merged["groups"].items(),
                    key=lambda item: -item[1]["mean_abs"])
    print("explain: " + " ".join(f"{name}={entry['mean_abs']:.4g}"
                                 for name, entry in ranked[:4]))
    return 0


def _cmd_score(run: Run, args, settings) -> int:
    task = Task(settings["task"])
    records, _, embeddings, annotations = _load_corpus(run, args.corpus, task)
    pairs = parse_pair_table(run.read_text(args.pairs), task)
    if args.bundle:
        bundle = bundle_from_json(run.read_text(args.bundle))
    else:
        bundle = DatasetBundle(task=task, splits={})
    ctx = _context(records, embeddings, annotations, bundle, settings, task)
    if args.ruleset:
        ruleset = parse_ruleset(run.read_text(args.ruleset))
        matrix, names = ctx.signal_matrix(pairs)
        table = SignalTable(matrix=matrix, labels=_labels(pairs), names=names)
        scores = score_table(ruleset, table)
        threshold = ruleset.decision_threshold
    else:
        models, threshold = load_scorer(run, args.model)
        scores = ensemble_predict(models, ctx.tensor_matrix(pairs))
    run.write_text("scores.tsv", _scores_tsv(pairs, scores, threshold))
    positives = int(np.sum(scores > threshold))
    print(f"score: {len(pairs)} pairs, {positives} predicted positive "
          f"at threshold {threshold}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairforge",
        description="Leakage-controlled pair-interaction benchmark pipeline.",
        epilog="PAIRFORGE_THREADS caps worker threads; results are identical "
               "at any setting.")
    parser.add_argument("--version", action="version",
                        version=f"pairforge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("--config", help="TOML settings file (flags win)")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--task", choices=[t.value for t in Task])
        p.add_argument("--out", required=True, help="output directory")
        return p

    p = common(sub.add_parser("split", help="assign proteins, route pairs, "
                                            "synthesize negatives"))
    p.add_argument("--corpus", required=True, help="corpus directory")

    p = common(sub.add_parser("verify", help="audit a bundle for leakage and "
                                             "imbalance"))
    p.add_argument("--bundle", required=True, help="bundle.json from split")

    p = common(sub.add_parser("featurize", help="write signal tables and "
                                                "pair tensors per split"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--bundle", required=True)

    p = common(sub.add_parser("induce", help="induce an interpretable "
                                             "ruleset"))
    p.add_argument("--features", required=True,
                   help="directory with featurize outputs")
    p.add_argument("--strategy", choices=["greedy", "sparse", "hybrid"])

    p = common(sub.add_parser("train", help="train neural scorers"))
    p.add_argument("--features", help="directory with featurize outputs")
    p.add_argument("--folds", type=int,
                   help="rotate K validation folds over a frozen test set")
    p.add_argument("--corpus", help="required when --folds > 1")
    p.add_argument("--bundle", help="required when --folds > 1")

    p = common(sub.add_parser("evaluate", help="classification metrics on a "
                                               "scored file"))
    p.add_argument("--scores", help="existing scored pair table")
    p.add_argument("--model", help="checkpoint or ensemble.json")
    p.add_argument("--ruleset", help="ruleset.json")
    p.add_argument("--features", help="directory with featurize outputs")

    p = common(sub.add_parser("explain", help="group Shapley attribution"))
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)

    p = common(sub.add_parser("score", help="score new pairs with a ruleset "
                                            "or checkpoint"))
    p.add_argument("--corpus", required=True)
    p.add_argument("--pairs", required=True, help="pair table to score")
    p.add_argument("--ruleset")
    p.add_argument("--model")
    p.add_argument("--bundle", help="optional bundle for graph signals")
    return parser


HANDLERS = {
    "split": _cmd_split,
    "verify": _cmd_verify,
    "featurize": _cmd_featurize,
    "induce": _cmd_induce,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "score": _cmd_score,
}


def _check_usage(args: argparse.Namespace) -> Optional[str]:
    """Cross-flag requirements not expressible in argparse alone."""
    if args.command == "evaluate":
        chosen = [flag for flag in ("scores", "model", "ruleset")
                  if getattr(args, flag)]
        if len(chosen) != 1:
            return "evaluate needs exactly one of --scores/--model/--ruleset"
        if not args.scores and not args.features:
            return "evaluate needs --features unless --scores is given"
    if args.command == "score":
        chosen = [flag for flag in ("model", "ruleset")
                  if getattr(args, flag)]
        if len(chosen) != 1:
            return "score needs exactly one of --model/--ruleset"
    if args.command == "train":
        folds = args.folds or 1
        if folds <= 1 and not args.features:
            return "train needs --features when --folds is 1"
        if folds > 1 and (not args.corpus or not args.bundle):
            return "train needs --corpus and --bundle when --folds > 1"
    return None


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return 0 if not exc.code else 2
    usage_error = _check_usage(args)
    if usage_error is not None:
        print(f"usage error: {usage_error}", file=sys.stderr)
        return 2
    started = time.perf_counter()
    try:
        settings = load_settings(args)
        command = Run(args.command, Path(args.out), settings)
        if getattr(args, "config", None):
            command.inputs[Path(args.config).name] = _digest(
                Path(args.config).read_bytes())
        status = HANDLERS[args.command](command, args, settings)
        command.finish(time.perf_counter() - started)
        return status
    except PairforgeError as err:
        print(json.dumps({"error": err.code, "message": str(err),
                          "details": {k: repr(v)
                                      for k, v in err.details.items()}},
                         sort_keys=True), file=sys.stderr)
        return 3
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
