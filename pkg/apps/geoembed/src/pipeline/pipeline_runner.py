"""End-to-end composition: compress every slot, refine the seasonal slots, compose.

Outputs written to the configured output directory:

    ensemble.emb       final N x total_dim embeddings
    layout.json        slot ranges actually used
    plan.json          chosen widths and, when searched, the scored table
    svd_<id>.emb       one SVD model per compressed source
    refiner_map.emb    trained seasonal map (when refinement ran)
    loss_trace.jsonl   per-epoch refiner loss (when refinement ran)
    evaluation.json    task scores (when tasks are configured)
    provenance.json    input/output hashes, seeds, versions
"""
import json
import logging
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from geoembed_common.errors import GeoEmbedError
from geoembed_common.store import EmbeddingMatrix, Manifest, save_embeddings, stack_rows
from compression import SvdModel, fit_truncated_svd, save_svd_model, transform
from ensemble import (
    CompressionPlan,
    EnsembleLayout,
    LayoutError,
    MissingSlotError,
    compose,
    resolve_layout,
    search_rates,
    with_widths,
)
from evaluation import evaluate, load_leaderboard, load_task
from evaluation.evaluation_models import EvaluationReport
from refiner import SEASONS, RefinerState, refine_seasons, save_linear_map, write_loss_trace

from utils.seeds import stage_seeds

from .pipeline_config import PipelineConfig
from .provenance import build_provenance, write_provenance

logger = logging.getLogger(__name__)

PIPELINE_STAGES = ("load", "search", "compress", "refine", "compose", "evaluate")


@contextmanager
def stage(name: str):
    """Tags any toolkit error raised inside with the stage that raised it."""
    try:
        yield
    except GeoEmbedError as e:
        if e.stage is None:
            e.stage = name
        logger.error(f"Pipeline stage '{name}' failed: [{e.code}] {e}")
        raise


@dataclass
class PipelineResult:
    layout: EnsembleLayout
    ensemble: EmbeddingMatrix
    output_paths: Dict[str, Path]
    seeds: Dict[str, int]
    plan: Optional[CompressionPlan] = None
    refiner_state: Optional[RefinerState] = None
    evaluation: Optional[EvaluationReport] = None
    svd_models: Dict[str, SvdModel] = field(default_factory=dict)


def _write_json(payload: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_slot_sources(
    manifest: Manifest,
    layout: EnsembleLayout,
) -> Dict[str, EmbeddingMatrix]:
    missing = [m for m in layout.model_ids if manifest.get_entry(m) is None]
    if missing:
        raise MissingSlotError(
            f"Manifest has no embeddings for slots {missing}",
            code=f"missing_slot:{missing[0]}",
        )
    return manifest.load_matrices()


def seasonal_groups(manifest: Manifest, layout: EnsembleLayout) -> Dict[str, List[str]]:
    """Source model id -> the layout slot ids holding its seasons."""
    groups = defaultdict(list)
    for slot_id in layout.model_ids:
        entry = manifest.get_entry(slot_id)
        if entry is not None and entry.season:
            groups[entry.model_id].append(slot_id)
    return dict(groups)


def compress_slots(
    sources: Dict[str, EmbeddingMatrix],
    manifest: Manifest,
    layout: EnsembleLayout,
    seed: int,
    center: bool = False,
) -> tuple[Dict[str, EmbeddingMatrix], Dict[str, SvdModel]]:
    """Each slot to its layout width; seasons of one model share a basis.

    A slot whose native width already equals its layout width is passed
    through unchanged and gets no SVD model.
    """
    compressed: Dict[str, EmbeddingMatrix] = {}
    models: Dict[str, SvdModel] = {}
    widths = layout.widths()

    groups = seasonal_groups(manifest, layout)
    for model_id, slot_ids in groups.items():
        group_widths = {widths[s] for s in slot_ids}
        if len(group_widths) != 1:
            raise LayoutError(
                f"Seasonal slots of '{model_id}' must share one width, got "
                f"{ {s: widths[s] for s in slot_ids} }",
                code="invalid_layout",
            )
        stacked = stack_rows([sources[s] for s in slot_ids], model_id=model_id)
        width = group_widths.pop()
        if width == stacked.n_cols:
            logger.info(f"'{model_id}' is already {width} wide; seasons pass through unchanged")
            for slot_id in slot_ids:
                compressed[slot_id] = sources[slot_id].with_data(sources[slot_id].data, model_id=slot_id)
            continue
        model = fit_truncated_svd(stacked, width, seed, center=center)
        models[model_id] = model
        for slot_id in slot_ids:
            z = transform(model, sources[slot_id])
            compressed[slot_id] = z.with_data(z.data, model_id=slot_id)

    grouped = {s for slot_ids in groups.values() for s in slot_ids}
    for slot_id in layout.model_ids:
        if slot_id in grouped:
            continue
        if widths[slot_id] == sources[slot_id].n_cols:
            logger.info(f"'{slot_id}' is already {widths[slot_id]} wide; passing through unchanged")
            compressed[slot_id] = sources[slot_id].with_data(sources[slot_id].data, model_id=slot_id)
            continue
        model = fit_truncated_svd(sources[slot_id], widths[slot_id], seed, center=center)
        models[slot_id] = model
        z = transform(model, sources[slot_id])
        compressed[slot_id] = z.with_data(z.data, model_id=slot_id)

    logger.info(f"Compressed {len(compressed)} slots with {len(models)} SVD models")
    return compressed, models


def run_pipeline(cfg: PipelineConfig, config_path: Optional[Path] = None) -> PipelineResult:
    seeds = stage_seeds(cfg.seed, PIPELINE_STAGES)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: Dict[str, Path] = {}

    with stage("load"):
        manifest = Manifest.from_file(cfg.manifest)
        layout = resolve_layout(cfg.layout)
        sources = load_slot_sources(manifest, layout)

    plan = None
    settings = cfg.compression
    if settings.candidates:
        with stage("search"):
            unknown = sorted(set(settings.candidates) - set(layout.model_ids))
            if unknown:
                raise LayoutError(f"Search candidates name slots not in the layout: {unknown}")
            budget = settings.total_budget or sum(layout.widths()[m] for m in settings.candidates)
            plan = search_rates(
                {m: sources[m] for m in settings.candidates if m in sources},
                settings.candidates,
                budget,
                settings.k_clusters,
                seeds["search"],
                mse_weight=settings.mse_weight,
                metric=settings.metric,
                center=settings.center,
            )
            layout = with_widths(layout, plan.targets)

    with stage("compress"):
        compressed, models = compress_slots(
            sources, manifest, layout, seeds["compress"], center=settings.center
        )
        for model_id, model in models.items():
            path = out_dir / f"svd_{model_id}.emb"
            save_svd_model(model, path)
            outputs[f"svd_{model_id}"] = path

    state = None
    refiner_settings = cfg.refiner
    season_slots = seasonal_groups(manifest, layout).get(refiner_settings.model_id, [])
    if refiner_settings.enabled and season_slots:
        with stage("refine"):
            seasons = {manifest.get_entry(s).season: compressed[s] for s in season_slots}
            state, _, refined = refine_seasons(
                seasons, refiner_settings.to_refiner_config(seeds["refine"])
            )
            for season, matrix in zip(SEASONS, refined):
                compressed[f"{refiner_settings.model_id}_{season}"] = matrix
            outputs["refiner_map"] = out_dir / "refiner_map.emb"
            save_linear_map(state.map, outputs["refiner_map"])
            outputs["loss_trace"] = out_dir / "loss_trace.jsonl"
            write_loss_trace(state, outputs["loss_trace"])
    elif refiner_settings.enabled:
        logger.warning(f"No seasonal slots for '{refiner_settings.model_id}' in layout; skipping refinement")

    with stage("compose"):
        ensemble = compose(layout, compressed, normalize_slots=cfg.normalize_slots)
        outputs["ensemble"] = out_dir / "ensemble.emb"
        save_embeddings(ensemble, outputs["ensemble"])
        outputs["layout"] = out_dir / "layout.json"
        layout.to_file(outputs["layout"])
        outputs["plan"] = _write_json(
            {
                "targets": layout.widths(),
                "total_dim": layout.total_dim,
                "search": plan.to_json_dict() if plan else None,
            },
            out_dir / "plan.json",
        )

    report = None
    if cfg.evaluation.tasks:
        with stage("evaluate"):
            tasks = [load_task(p) for p in cfg.evaluation.tasks]
            leaderboard = load_leaderboard(cfg.evaluation.leaderboard) if cfg.evaluation.leaderboard else None
            report = evaluate(tasks, leaderboard, team=cfg.evaluation.team)
            outputs["evaluation"] = _write_json(report.model_dump(mode="json"), out_dir / "evaluation.json")

    inputs = [cfg.manifest, *[e.path for e in manifest.entries]]
    inputs += list(cfg.evaluation.tasks)
    if cfg.evaluation.leaderboard:
        inputs.append(cfg.evaluation.leaderboard)
    if config_path is not None:
        inputs.insert(0, Path(config_path))

    provenance_path = out_dir / "provenance.json"
    write_provenance(
        build_provenance(
            "pipeline",
            provenance_path,
            inputs=inputs,
            outputs=[outputs[k] for k in sorted(outputs)],
            seed=cfg.seed,
            stage_seeds=seeds,
            parameters=cfg.model_dump(mode="json", exclude={"manifest", "output_dir"}),
        ),
        provenance_path,
    )
    outputs["provenance"] = provenance_path

    logger.info(f"Pipeline finished: {ensemble.shape} written to {outputs['ensemble']}")
    return PipelineResult(
        layout=layout,
        ensemble=ensemble,
        output_paths=outputs,
        seeds=seeds,
        plan=plan,
        refiner_state=state,
        evaluation=report,
        svd_models=models,
    )
