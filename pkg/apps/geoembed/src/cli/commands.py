"""Subcommand handlers. Each returns an exit code and lets toolkit errors propagate."""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from geoembed_common.store import (
    Manifest,
    load_embeddings,
    load_metadata,
    save_embeddings,
)
from adapters import (
    CaptionConfig,
    captions_for_metadata,
    expand_first_layer_channels,
    load_conv_weight,
    preserve_sum_mismatch,
    save_conv_weight,
)
from clustering import compression_quality
from clustering.quality import input_variance
from compression import (
    compress,
    explained_variance_ratio,
    reconstruct,
    reconstruction_mse,
    save_svd_model,
)
from ensemble import compose, resolve_layout, search_rates
from evaluation import evaluate, load_leaderboard, load_task
from pipeline import load_pipeline_config, run_pipeline
from pipeline.provenance import build_provenance, verify_provenance, write_provenance
from refiner import SEASONS, refine_seasons, save_linear_map, write_loss_trace
from refiner.refiner_models import RefinerConfig
from utils.seeds import derive_stage_seed

logger = logging.getLogger(__name__)


def _write_json_file(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _sibling(path: Path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.name + suffix)


def _record(
    command: str,
    record_path: Path,
    inputs: List[Path],
    outputs: List[Path],
    seed: Optional[int] = None,
    stage_seeds: Optional[Dict[str, int]] = None,
    parameters: Optional[dict] = None,
) -> None:
    write_provenance(
        build_provenance(command, record_path, inputs, outputs, seed, stage_seeds, parameters),
        record_path,
    )


def cmd_compress(args: argparse.Namespace) -> int:
    seed = derive_stage_seed(args.seed, "compress")
    x = load_embeddings(args.input)
    model, z = compress(x, args.k, seed, center=args.center)
    x_hat = reconstruct(model, z)
    mse = reconstruction_mse(x, x_hat)
    variance = input_variance(x)

    out = Path(args.out)
    model_path = Path(args.model_out) if args.model_out else _sibling(out, ".svd")
    quality_path = Path(args.quality_out) if args.quality_out else _sibling(out, ".quality.json")
    save_embeddings(z, out)
    save_svd_model(model, model_path)
    _write_json_file(quality_path, {
        "model_id": x.model_id,
        "input_dim": x.n_cols,
        "target_dim": args.k,
        "n_rows": x.n_rows,
        "centered": model.centered,
        "mse": mse,
        "normalized_mse": mse / variance if variance > 0 else mse,
        "explained_variance": explained_variance_ratio(model, x),
    })
    _record(
        "compress", _sibling(out, ".provenance.json"),
        inputs=[args.input], outputs=[out, model_path, quality_path],
        seed=args.seed, stage_seeds={"compress": seed},
        parameters={"k": args.k, "center": args.center},
    )
    logger.info(f"Compressed '{x.model_id}' {x.shape} -> {z.shape}")
    return 0


def cmd_quality(args: argparse.Namespace) -> int:
    seed = derive_stage_seed(args.seed, "quality")
    x = load_embeddings(args.input)
    report = compression_quality(
        x, args.dims, args.k_clusters, seed, metric=args.metric, center=args.center
    )
    out = _write_json_file(args.out, report.to_json_dict())
    _record(
        "quality", _sibling(out, ".provenance.json"),
        inputs=[args.input], outputs=[out],
        seed=args.seed, stage_seeds={"quality": seed},
        parameters={"dims": sorted(args.dims), "k_clusters": args.k_clusters, "metric": args.metric},
    )
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    seed = derive_stage_seed(args.seed, "search")
    manifest = Manifest.from_file(args.manifest)
    candidates = dict(args.candidate)
    entries = [manifest.get_entry(m) for m in candidates]
    embeddings = {e.slot_key: load_embeddings(e.path) for e in entries if e is not None}

    plan = search_rates(
        embeddings, candidates, args.budget, args.k_clusters, seed,
        mse_weight=args.mse_weight, metric=args.metric, center=args.center,
    )
    out = _write_json_file(args.out, plan.to_json_dict())
    _record(
        "search", _sibling(out, ".provenance.json"),
        inputs=[args.manifest, *[e.path for e in entries if e is not None]], outputs=[out],
        seed=args.seed, stage_seeds={"search": seed},
        parameters={"candidates": candidates, "budget": args.budget, "mse_weight": args.mse_weight},
    )
    print(json.dumps(plan.targets, sort_keys=True))
    return 0


def cmd_refine(args: argparse.Namespace) -> int:
    seed = derive_stage_seed(args.seed, "refine")
    manifest = Manifest.from_file(args.manifest)
    entries = manifest.seasons_of(args.model)
    seasons = {e.season: load_embeddings(e.path) for e in entries}
    cfg = RefinerConfig(
        n_pseudo_clusters=args.clusters,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        l2_penalty=args.l2,
        momentum=args.momentum,
        seed=seed,
        linkage=args.linkage,
        freeze_map=args.freeze_map,
        holdout_fraction=args.holdout,
    )
    state, labels, refined = refine_seasons(seasons, cfg)

    out_dir = Path(args.out_dir)
    outputs = [out_dir / "refiner_map.emb", out_dir / "loss_trace.jsonl"]
    save_linear_map(state.map, outputs[0])
    write_loss_trace(state, outputs[1])
    for season, matrix in zip(SEASONS, refined):
        path = out_dir / f"{args.model}_{season}.emb"
        save_embeddings(matrix, path)
        outputs.append(path)

    _record(
        "refine", out_dir / "provenance.json",
        inputs=[args.manifest, *[e.path for e in entries]], outputs=outputs,
        seed=args.seed, stage_seeds={"refine": seed},
        parameters=cfg.model_dump(mode="json"),
    )
    logger.info(f"Refined {len(refined)} seasons over {labels.n_clusters} pseudo-clusters")
    return 0


def cmd_compose(args: argparse.Namespace) -> int:
    manifest = Manifest.from_file(args.manifest)
    layout = resolve_layout(args.layout)
    compressed = {e.slot_key: load_embeddings(e.path) for e in manifest.entries}
    ensemble = compose(layout, compressed, normalize_slots=args.normalize_slots)

    out = Path(args.out)
    save_embeddings(ensemble, out)
    _record(
        "compose", _sibling(out, ".provenance.json"),
        inputs=[args.manifest, *[e.path for e in manifest.entries]], outputs=[out],
        parameters={"layout": layout.to_dict(), "normalize_slots": args.normalize_slots},
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    tasks = [load_task(p) for p in args.task]
    leaderboard = load_leaderboard(args.leaderboard) if args.leaderboard else None
    report = evaluate(tasks, leaderboard, team=args.team)

    out = _write_json_file(args.out, report.model_dump(mode="json"))
    inputs = list(args.task) + ([args.leaderboard] if args.leaderboard else [])
    _record("evaluate", _sibling(out, ".provenance.json"), inputs=inputs, outputs=[out],
            parameters={"team": args.team})
    print(json.dumps({"q_mean": report.q_mean, "task_balanced_q_mean": report.task_balanced_q_mean}))
    return 0


def cmd_adapt(args: argparse.Namespace) -> int:
    w = load_conv_weight(args.input)
    expanded = expand_first_layer_channels(w, args.target_in, args.scale_policy)
    out = Path(args.out)
    save_conv_weight(expanded, out)
    _record(
        "adapt", _sibling(out, ".provenance.json"), inputs=[args.input], outputs=[out],
        parameters={
            "target_in": args.target_in,
            "scale_policy": args.scale_policy,
            "preserve_sum_mismatch": preserve_sum_mismatch(w.in_channels, args.target_in),
        },
    )
    return 0


def cmd_caption(args: argparse.Namespace) -> int:
    cfg = CaptionConfig(verbatim_spelling=not args.corrected_spelling, decimal_places=args.decimals)
    rows = load_metadata(args.metadata)
    captions = captions_for_metadata(rows, args.template, cfg)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("".join(f"{c}\n" for c in captions), encoding="utf-8")
    _record(
        "caption", _sibling(out, ".provenance.json"), inputs=[args.metadata], outputs=[out],
        parameters={"template": args.template, **cfg.model_dump()},
    )
    return 0


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = load_pipeline_config(
        args.config,
        overrides={"seed": args.seed, "output_dir": args.output_dir},
    )
    result = run_pipeline(cfg, config_path=Path(args.config))
    print(json.dumps({k: str(v) for k, v in sorted(result.output_paths.items())}, indent=2))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    verified = verify_provenance(args.provenance)
    print(json.dumps({"verified": len(verified)}))
    return 0
