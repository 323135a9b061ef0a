"""Command-line pipeline: gen, featurize, split, train, eval, ablate, tune, report.

Every stage reads and writes artifacts under a work directory::

    work/
      manifest.json           featurize manifest (records fingerprint, linker vocab)
      signatures.jsonl
      blocks/<MOD>.npy        plus <MOD>.columns.json
      splits/<scheme>.json
      runs/<name>/            run.json, fold_XX model files, fold_XX.pred.json
      reports/<name>.json     metric reports only, so reruns compare byte for byte
      manifests/<stage>_<name>.json   config hash, seed and timings per stage

Each artifact carries a protocol hash over the data fingerprint and the
fields that fix the folds (ratios, fold count, seed, batch size, target
family). Runs that differ only in model or mask share a hash and can be
reported together.

Exit codes: 0 ok, 2 configuration error, 3 missing upstream artifact,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import linear, neural, tuning
from .bio_features import read_biophys
from .dataset import DataError, SignatureSet, aggregate_by_signature, parse_records
from .evaluation import (
    FoldReport,
    ablation_run,
    family_rmsd_yield_report,
    format_family_report,
    format_reports,
    report_from_results,
)
from .experiment import (
    FeatureSet,
    FoldResult,
    ModelSpec,
    _cnn_tensor,
    fit_predict,
    fold_design,
    is_classification,
    metric_names,
    score_fold,
    task_targets,
)
from .fusion import MODALITY_ORDER, FeatureBlock, Modality, ModalityMask
from .splits import Scheme, check_plan, largest_family, load_folds, make_folds, save_folds
from .struct_features import pair_features_from_files
from .synthetic import GenConfig, format_stats, generate, stats_report

log = logging.getLogger("abreformat")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


@dataclass
class RunConfig:
    data: Optional[str] = None
    records: Optional[str] = None
    structures: Optional[str] = None
    biophys: Optional[str] = None
    position_maps: Optional[str] = None
    embeddings: Optional[str] = None
    work: str = "work"
    scheme: str = "signature"
    n_folds: int = 10
    ratios: tuple = (0.6, 0.1, 0.3)
    mask: str = "seq,struct,rmsd,bio"
    model: str = "logistic"
    task: str = "qc"
    seed: int = 0
    batch_size: int = 32
    target_family: Optional[str] = None
    n_trials: int = tuning.DEFAULT_TRIALS
    search: Optional[dict] = None
    model_params: dict = field(default_factory=dict)

    def path(self, name: str, default: str) -> Optional[Path]:
        v = getattr(self, name)
        if v:
            return Path(v)
        return Path(self.data) / default if self.data else None

    def protocol(self, data_fingerprint: str) -> dict:
        return {
            "data": data_fingerprint,
            "ratios": list(self.ratios),
            "n_folds": self.n_folds,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "target_family": self.target_family,
        }


def config_hash(protocol: dict) -> str:
    return hashlib.sha1(json.dumps(protocol, sort_keys=True).encode()).hexdigest()[:12]


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError("config file must hold a JSON object")
    return d


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    file_cfg = load_config(getattr(args, "config", None))
    known = {f.name for f in fields(RunConfig)}
    unknown = set(file_cfg) - known - {"gen"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    cfg = RunConfig(**{k: v for k, v in file_cfg.items() if k in known})
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    cfg.ratios = tuple(float(r) for r in cfg.ratios)
    if len(cfg.ratios) != 3 or abs(sum(cfg.ratios) - 1.0) > 1e-9:
        raise ConfigError("ratios must be three numbers summing to 1")
    if cfg.n_folds < 1:
        raise ConfigError("--folds must be >= 1")
    if cfg.task not in ("qc", "yield", "sec"):
        raise ConfigError("--task must be qc, yield or sec")
    try:
        Scheme.parse(cfg.scheme)
        ModalityMask.parse(cfg.mask)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


# ---------------------------------------------------------------------------
# artifact helpers


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"missing {what}: {path}")
    return path


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True))


def _read_json(path: Path, what: str):
    return json.loads(_need(path, what).read_text())


def _warn_hash(found: Optional[str], expected: str, what: str) -> None:
    if found is not None and found != expected:
        log.warning("config hash mismatch: %s has %s, current run is %s", what, found, expected)


def _work(cfg: RunConfig) -> Path:
    return Path(cfg.work)


def _fingerprint(cfg: RunConfig) -> str:
    man = _read_json(_work(cfg) / "manifest.json", "featurize manifest (run `featurize` first)")
    return man["records_sha1"]


def _load_signatures(cfg: RunConfig) -> SignatureSet:
    p = _need(_work(cfg) / "signatures.jsonl", "signature set (run `featurize` first)")
    with open(p) as fh:
        return SignatureSet.from_jsonl(fh)


def _load_features(cfg: RunConfig) -> FeatureSet:
    bdir = _work(cfg) / "blocks"
    blocks = {}
    for m in MODALITY_ORDER:
        if (bdir / f"{m.value}.npy").exists():
            blocks[m] = FeatureBlock.load(bdir / m.value)
    emb = FeatureBlock.load(bdir / "EMB") if (bdir / "EMB.npy").exists() else None
    return FeatureSet(blocks, emb)


def _check_blocks(features: FeatureSet, mask: ModalityMask) -> None:
    for m in mask.ordered:
        if m not in features.blocks:
            raise MissingArtifact(f"missing feature block {m.value} (featurize with its inputs)")


def _load_split(cfg: RunConfig, expected_hash: str):
    scheme = Scheme.parse(cfg.scheme)
    p = _work(cfg) / "splits" / f"{scheme.value.lower()}.json"
    plans, meta = load_folds(_need(p, f"{scheme.value} folds (run `split` first)"))
    _warn_hash(meta.get("config_hash"), expected_hash, str(p))
    return plans, meta


def _spec(cfg: RunConfig) -> ModelSpec:
    params = dict(cfg.model_params)
    if cfg.model in ("mlp", "cnn"):
        base = ModelSpec.default_for(cfg.model, cfg.task)
        sub = getattr(base, cfg.model)
        try:
            sub = replace(sub, **params.pop(cfg.model, {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {cfg.model} parameters: {exc}") from None
        return replace(base, **{cfg.model: sub}, **params)
    if cfg.model not in ("logistic", "linear"):
        raise ConfigError(f"unknown model {cfg.model!r}")
    if is_classification(cfg.task) != (cfg.model == "logistic"):
        raise ConfigError(f"model {cfg.model} does not fit task {cfg.task}")
    return ModelSpec.default_for(cfg.model, cfg.task, **params)


def _manifest(cfg: RunConfig, stage: str, chash: str, started: Optional[float] = None, **extra) -> dict:
    m = {"stage": stage, "config_hash": chash, "seed": cfg.seed, "config": asdict(cfg), **extra}
    if started is not None:
        m["seconds"] = round(time.time() - started, 3)
    return m


def _stage_manifest(cfg: RunConfig, stage: str, name: str, chash: str, started: float, **extra) -> None:
    _write_json(_work(cfg) / "manifests" / f"{stage}_{name}.json",
                _manifest(cfg, stage, chash, started, **extra))


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, cfg: RunConfig) -> int:
    started = time.time()
    gen_kwargs = load_config(getattr(args, "config", None)).get("gen", {})
    try:
        over = {k: getattr(args, k) for k in ("n_signatures", "n_families") if getattr(args, k) is not None}
        if args.with_embeddings:
            over["embedding_dim"] = 16
        # one construction, so paired overrides are validated together
        gcfg = GenConfig.from_dict({**gen_kwargs, **over, "seed": cfg.seed})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad generator config: {exc}") from None
    ds = generate(gcfg)
    out = ds.write(args.out)
    print(format_stats(stats_report(ds.signatures())), end="")
    _write_json(out / "run_manifest.json", {"stage": "gen", "seed": gcfg.seed,
                                            "gen_config": gcfg.to_dict(),
                                            "seconds": round(time.time() - started, 3)})
    return EXIT_OK


def cmd_featurize(args, cfg: RunConfig) -> int:
    started = time.time()
    rec_path = cfg.path("records", "records.csv")
    if rec_path is None:
        raise ConfigError("featurize needs --data or --records")
    raw = _need(rec_path, "records file").read_text()
    records = parse_records(raw)
    if not records:
        raise DataError("no valid records")
    sigs = aggregate_by_signature(records)
    work = _work(cfg)
    (work / "blocks").mkdir(parents=True, exist_ok=True)
    with open(work / "signatures.jsonl", "w") as fh:
        sigs.to_jsonl(fh)

    struct_dir = cfg.path("structures", "structures")
    bio_path = cfg.path("biophys", "biophys.csv")
    maps = cfg.path("position_maps", "position_maps")
    emb = cfg.path("embeddings", "embeddings")
    biophys = None
    if bio_path is not None and bio_path.exists():
        with open(bio_path) as fh:
            biophys = read_biophys(fh)
    features = FeatureSet.build(
        sigs,
        structure_dir=struct_dir if struct_dir is not None and struct_dir.exists() else None,
        biophys=biophys,
        position_map_dir=maps if maps is not None and maps.exists() else None,
        embedding_dir=emb if emb is not None and emb.exists() else None,
    )
    for m, block in features.blocks.items():
        block.save(work / "blocks" / m.value)
    if features.embeddings is not None:
        features.embeddings.save(work / "blocks" / "EMB")
    fp = hashlib.sha1(raw.encode()).hexdigest()
    chash = config_hash(cfg.protocol(fp))
    _write_json(work / "manifest.json", _manifest(
        cfg, "featurize", chash, started, records_sha1=fp, n_records=len(records),
        n_signatures=len(sigs), blocks=[m.value for m in features.blocks],
        embeddings=features.embeddings is not None,
    ))
    print(f"{len(sigs)} signatures from {len(records)} records; blocks: "
          + ", ".join(f"{m.value}({b.values.shape[1]})" for m, b in features.blocks.items()))
    return EXIT_OK


def cmd_split(args, cfg: RunConfig) -> int:
    started = time.time()
    sigs = _load_signatures(cfg)
    chash = config_hash(cfg.protocol(_fingerprint(cfg)))
    scheme = Scheme.parse(cfg.scheme)
    kwargs = {"ratios": cfg.ratios}
    if scheme is Scheme.TARGET_FAMILY:
        kwargs = {"target_family": cfg.target_family or largest_family(sigs),
                  "batch_size": cfg.batch_size}
    try:
        plans = make_folds(scheme, sigs, cfg.n_folds, cfg.seed, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for p in plans:
        check_plan(p, sigs)
    out = _work(cfg) / "splits" / f"{scheme.value.lower()}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_folds(plans, out, config_hash=chash, seed=cfg.seed)
    _stage_manifest(cfg, "split", scheme.value.lower(), chash, started)
    sizes = plans[0].sizes
    print(f"{scheme.value}: {len(plans)} folds, fold 0 sizes train/val/test = {sizes}")
    return EXIT_OK


def _run_name(cfg: RunConfig, name: Optional[str]) -> str:
    if name:
        return name
    return f"{cfg.model}_{Scheme.parse(cfg.scheme).value.lower()}_{ModalityMask.parse(cfg.mask).name}_{cfg.task}"


def _model_file(run_dir: Path, k: int, kind: str) -> Path:
    return run_dir / (f"fold_{k:02d}.json" if kind in ("logistic", "linear") else f"fold_{k:02d}.pt")


def cmd_train(args, cfg: RunConfig) -> int:
    started = time.time()
    sigs = _load_signatures(cfg)
    features = _load_features(cfg)
    chash = config_hash(cfg.protocol(_fingerprint(cfg)))
    plans, _ = _load_split(cfg, chash)
    mask = ModalityMask.parse(cfg.mask)
    spec = _spec(cfg)
    if not spec.use_embeddings:
        _check_blocks(features, mask)
    y, present = task_targets(sigs, cfg.task)
    name = _run_name(cfg, args.name)
    run_dir = _work(cfg) / "runs" / name
    run_dir.mkdir(parents=True, exist_ok=True)
    for k, plan in enumerate(plans):
        design = fold_design(features, mask, plan, y, present, spec.use_embeddings)
        scores, model = fit_predict(spec, design, mask, cfg.task, plan.fold_seed)
        if not np.all(np.isfinite(scores)):
            raise linear.NumericalError(f"fold {k}: non-finite predictions")
        model.save(_model_file(run_dir, k, spec.kind))
        _write_json(run_dir / f"fold_{k:02d}.pred.json", {
            "config_hash": chash, "test_rows": design.test_rows.tolist(),
            "scores": [float(s) for s in scores],
        })
    _write_json(run_dir / "run.json", _manifest(
        cfg, "train", chash, started, run=name, scheme=Scheme.parse(cfg.scheme).value,
        mask=mask.name, spec=spec.to_dict(), n_folds=len(plans),
    ))
    print(f"trained {len(plans)} folds -> {run_dir}")
    return EXIT_OK


def _load_model(path: Path, kind: str):
    if kind in ("logistic", "linear"):
        return linear.LinearModel.load(path)
    return neural.NeuralModel.load(path)


def cmd_eval(args, cfg: RunConfig) -> int:
    """Re-score every fold from the saved models and write a report."""
    started = time.time()
    name = _run_name(cfg, args.name)
    run_dir = _work(cfg) / "runs" / name
    run = _read_json(run_dir / "run.json", f"trained model for run {name!r} (run `train` first)")
    rcfg = RunConfig(**{**run["config"], "ratios": tuple(run["config"]["ratios"])})
    sigs = _load_signatures(rcfg)
    features = _load_features(rcfg)
    chash = config_hash(rcfg.protocol(_fingerprint(rcfg)))
    _warn_hash(run["config_hash"], chash, str(run_dir))
    plans, _ = _load_split(rcfg, chash)
    mask = ModalityMask.parse(rcfg.mask)
    spec = ModelSpec(**{**run["spec"],
                        "mlp": neural.MlpConfig(**run["spec"]["mlp"]),
                        "cnn": neural.CnnConfig(**run["spec"]["cnn"])})
    y, present = task_targets(sigs, rcfg.task)
    results = []
    for k, plan in enumerate(plans):
        model = _load_model(_need(_model_file(run_dir, k, spec.kind), f"fold {k} model"), spec.kind)
        design = fold_design(features, mask, plan, y, present, spec.use_embeddings)
        X = design.test
        if spec.kind == "cnn":
            X = _cnn_tensor(X, design.slices, mask)
        if isinstance(model, linear.LinearModel):
            scores = (linear.predict_proba if is_classification(rcfg.task) else linear.predict_value)(model, X)
        else:
            scores = model.predict_proba(X) if is_classification(rcfg.task) else model.predict_value(X)
        results.append(FoldResult(plan.fold_seed, score_fold(scores, design.y_test, rcfg.task),
                                  design.test_rows.tolist(), [float(s) for s in scores]))
    rep = report_from_results(results, metric_names(rcfg.task))
    label = f"{spec.kind} | {run['scheme']} | {mask.name} | {rcfg.task}"
    _write_json(_work(rcfg) / "reports" / f"{name}.json", {
        **_manifest(rcfg, "eval", chash, run=name), "label": label,
        "task": rcfg.task, "report": rep.to_dict(),
    })
    _stage_manifest(rcfg, "eval", name, chash, started)
    print(format_reports({label: rep}, metric_names(rcfg.task), getattr(args, "format", "table"),
                         label="model | split | mask | task"), end="")
    return EXIT_OK


def cmd_ablate(args, cfg: RunConfig) -> int:
    started = time.time()
    sigs = _load_signatures(cfg)
    features = _load_features(cfg)
    chash = config_hash(cfg.protocol(_fingerprint(cfg)))
    plans, _ = _load_split(cfg, chash)
    for m in (Modality.SEQ, Modality.STRUCT, Modality.RMSD):
        if m not in features.blocks:
            raise MissingArtifact(f"missing feature block {m.value} (ablation needs seq, struct, rmsd)")
    spec = _spec(cfg)
    table = ablation_run(features, sigs, plans, spec=spec, task=cfg.task)
    scheme = Scheme.parse(cfg.scheme).value
    for mask_name, rep in table.items():
        _write_json(_work(cfg) / "reports" / f"ablation_{scheme.lower()}_{mask_name}_{cfg.task}.json", {
            **_manifest(cfg, "ablate", chash), "label": f"ablation | {scheme} | {mask_name} | {cfg.task}",
            "task": cfg.task, "report": rep.to_dict(),
        })
    _stage_manifest(cfg, "ablate", f"{scheme.lower()}_{cfg.task}", chash, started)
    print(format_reports(table, metric_names(cfg.task), getattr(args, "format", "table"), label="mask"), end="")
    return EXIT_OK


def _tune_space(cfg: RunConfig) -> tuning.SearchSpace:
    if cfg.search:
        return tuning.SearchSpace.from_dict(cfg.search)
    return {"logistic": tuning.LINEAR_GRID, "linear": tuning.LINEAR_GRID,
            "mlp": tuning.MLP_GRID, "cnn": tuning.CNN_SPACE}[cfg.model]


def cmd_tune(args, cfg: RunConfig) -> int:
    """Search on fold 0's validation partition; test rows are never handed out."""
    started = time.time()
    sigs = _load_signatures(cfg)
    features = _load_features(cfg)
    chash = config_hash(cfg.protocol(_fingerprint(cfg)))
    plans, _ = _load_split(cfg, chash)
    plan = plans[0]
    mask = ModalityMask.parse(cfg.mask)
    base = _spec(cfg)
    if not base.use_embeddings:
        _check_blocks(features, mask)
    y, present = task_targets(sigs, cfg.task)
    design = fold_design(features, mask, plan, y, present, base.use_embeddings)
    train = tuning.PartitionView("train", design.train, design.y_train)
    val = tuning.PartitionView("val", design.val, design.y_val)
    metric = "auroc" if is_classification(cfg.task) else "pearson"

    def objective(params, tr, va):
        if base.kind in ("logistic", "linear"):
            spec = replace(base, **params)
        else:
            sub = replace(getattr(base, base.kind), **params)
            spec = replace(base, **{base.kind: sub})
        # the fit sees train and val only; val takes the place of the test slot
        d = replace(design, train=tr.X, y_train=tr.y, val=va.X, y_val=va.y, test=va.X, y_test=va.y)
        try:
            scores, _ = fit_predict(spec, d, mask, cfg.task, plan.fold_seed)
        except (linear.NumericalError, ValueError):
            return float("nan")
        return score_fold(scores, va.y, cfg.task).get(metric, float("nan"))

    space = _tune_space(cfg)
    out_dir = _work(cfg) / "runs" / (args.name or f"tune_{cfg.model}_{cfg.task}")
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "trials.jsonl"
    log_path.unlink(missing_ok=True)
    if space.is_finite() and not args.random:
        res = tuning.grid_search(space, objective, train, val, log_path=log_path)
    else:
        res = tuning.random_search(space, objective, train, val, cfg.n_trials, cfg.seed, log_path=log_path)
    _write_json(out_dir / "best.json", {
        **_manifest(cfg, "tune", chash, started), "metric": metric,
        "best_params": res.best_params, "best_score": res.best_score, "n_trials": len(res.trials),
    })
    print(f"{len(res.trials)} trials, best val {metric} = {res.best_score:.4f}: "
          + json.dumps(res.best_params, sort_keys=True))
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    rdir = _need(_work(cfg) / "reports", "reports directory (run `eval` or `ablate` first)")
    files = sorted(rdir.glob("*.json"))
    if not files:
        raise MissingArtifact(f"no reports in {rdir}")
    entries = [json.loads(p.read_text()) for p in files]
    hashes = sorted({e["config_hash"] for e in entries})
    if len(hashes) > 1 and not args.force:
        raise ConfigError(f"reports come from different config hashes {hashes}; pass --force to mix")
    by_task: dict[str, dict[str, FoldReport]] = {}
    for e in entries:
        by_task.setdefault(e["task"], {})[e["label"]] = FoldReport.from_dict(e["report"])
    chunks = []
    for task, rows in sorted(by_task.items()):
        if args.format == "table":
            chunks.append(f"# task: {task}\n")
        chunks.append(format_reports(rows, metric_names(task), args.format,
                                     label="model | split | mask | task"))
    text = "".join(chunks)
    if args.family_rmsd:
        sigs = _load_signatures(cfg)
        feats = _load_features(cfg)
        if Modality.RMSD not in feats.blocks:
            raise MissingArtifact("missing RMSD block for the per-family report")
        rows, notes = family_rmsd_yield_report(sigs, feats.blocks[Modality.RMSD].values)
        text += "\n" + format_family_report(rows) + "".join(f"# {n}\n" for n in notes)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_structfeat(args, cfg: RunConfig) -> int:
    parental, scfv = (_need(Path(p), "structure file") for p in args.pair)
    f = pair_features_from_files(parental, scfv)
    print(f"rmsd_vh\t{f.rmsd_vh:.6f}\nrmsd_vl\t{f.rmsd_vl:.6f}")
    if args.out:
        np.save(args.out, f.per_residue)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--work", help="work directory (default: work)")
    p.add_argument("--seed", type=int)
    p.add_argument("--folds", dest="n_folds", type=int)
    p.add_argument("--scheme", help="signature | family | target")
    p.add_argument("--mask", help="comma-separated modalities, e.g. seq,struct,rmsd,bio")
    p.add_argument("--model", choices=("logistic", "linear", "mlp", "cnn"))
    p.add_argument("--task", choices=("qc", "yield", "sec"))
    p.add_argument("--target-family", dest="target_family")
    p.add_argument("--batch-size", dest="batch_size", type=int,
                   help="target-family batch placed in train")
    p.add_argument("--ratios", type=float, nargs=3, metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abreformat", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n-signatures", dest="n_signatures", type=int)
    p.add_argument("--n-families", dest="n_families", type=int)
    p.add_argument("--with-embeddings", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("featurize", help="parse records and build feature blocks")
    _common(p)
    p.add_argument("--data", help="dataset directory (records.csv, structures/, ...)")
    for name in ("records", "structures", "biophys", "position-maps", "embeddings"):
        p.add_argument(f"--{name}", dest=name.replace("-", "_"))
    p.set_defaults(func=cmd_featurize)

    for name, func, hlp in (
        ("split", cmd_split, "write repeated folds for one scheme"),
        ("train", cmd_train, "fit one model per fold"),
        ("eval", cmd_eval, "score saved fold models and write a report"),
        ("ablate", cmd_ablate, "seven-configuration modality ablation"),
        ("tune", cmd_tune, "hyperparameter search on fold 0 validation"),
    ):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        if name in ("train", "eval", "tune"):
            p.add_argument("--name", help="run name (default derived from model/scheme/mask/task)")
        if name in ("eval", "ablate"):
            p.add_argument("--format", choices=("table", "tsv"), default="table")
        if name == "tune":
            p.add_argument("--trials", dest="n_trials", type=int)
            p.add_argument("--random", action="store_true", help="random search even for finite spaces")
        p.set_defaults(func=func)

    p = sub.add_parser("report", help="collect reports into one table")
    _common(p)
    p.add_argument("--format", choices=("table", "tsv"), default="table")
    p.add_argument("--force", action="store_true", help="allow mixing config hashes")
    p.add_argument("--family-rmsd", action="store_true", help="append per-family RMSD-yield correlations")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("structfeat", help="RMSD and per-residue features for one structure pair")
    _common(p)
    p.add_argument("--pair", nargs=2, required=True, metavar=("PARENTAL", "SCFV"))
    p.add_argument("--out", help="save the (2, 152, 8) per-residue tensor as .npy")
    p.set_defaults(func=cmd_structfeat)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = build_config(args)
        return args.func(args, cfg)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except linear.NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
