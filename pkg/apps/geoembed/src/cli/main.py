import argparse
import json
import logging
import sys
from typing import List, Optional, Tuple

from pydantic import ValidationError

from geoembed_common import __version__
from geoembed_common.errors import ConfigError, GeoEmbedError, StoreIOError
from clustering.cluster_models import LINKAGES, METRICS
from utils.logging import configure_logging

from . import commands

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE_ERROR = 2


def _int_list(raw: str) -> List[int]:
    try:
        return [int(x.strip()) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got {raw!r}")


def _candidate(raw: str) -> Tuple[str, List[int]]:
    if "=" not in raw:
        raise argparse.ArgumentTypeError(f"Expected MODEL=D1,D2,... got {raw!r}")
    model_id, dims = raw.split("=", 1)
    return model_id, _int_list(dims)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoembed",
        description="Compress, refine, compose and evaluate geospatial embeddings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Overrides GEOEMBED_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # compress
    compress = subparsers.add_parser("compress", help="Truncated SVD of one embedding file.")
    compress.add_argument("--in", dest="input", required=True, metavar="EMB")
    compress.add_argument("--k", type=int, required=True)
    compress.add_argument("--seed", type=int, required=True)
    compress.add_argument("--out", required=True, metavar="EMB")
    compress.add_argument("--center", action="store_true", help="Mean-centre (PCA) instead of plain SVD")
    compress.add_argument("--model-out", default=None, metavar="PATH")
    compress.add_argument("--quality-out", default=None, metavar="JSON")
    compress.set_defaults(handler=commands.cmd_compress)

    # quality
    quality = subparsers.add_parser("quality", help="Reconstruction error and silhouette per target dim.")
    quality.add_argument("--in", dest="input", required=True, metavar="EMB")
    quality.add_argument("--dims", type=_int_list, required=True, metavar="D1,D2,...")
    quality.add_argument("--k-clusters", type=int, default=8)
    quality.add_argument("--seed", type=int, required=True)
    quality.add_argument("--metric", choices=METRICS, default="euclidean")
    quality.add_argument("--center", action="store_true")
    quality.add_argument("--out", required=True, metavar="JSON")
    quality.set_defaults(handler=commands.cmd_quality)

    # search
    search = subparsers.add_parser("search", help="Pick per-model widths under a total budget.")
    search.add_argument("--manifest", required=True, metavar="JSON")
    search.add_argument("--candidate", type=_candidate, action="append", required=True,
                        metavar="MODEL=D1,D2,...")
    search.add_argument("--budget", type=int, required=True)
    search.add_argument("--k-clusters", type=int, default=8)
    search.add_argument("--seed", type=int, required=True)
    search.add_argument("--mse-weight", type=float, default=1.0)
    search.add_argument("--metric", choices=METRICS, default="euclidean")
    search.add_argument("--center", action="store_true")
    search.add_argument("--out", required=True, metavar="JSON")
    search.set_defaults(handler=commands.cmd_search)

    # refine
    refine = subparsers.add_parser("refine", help="Train the shared seasonal map on pseudolabels.")
    refine.add_argument("--manifest", required=True, metavar="JSON")
    refine.add_argument("--model", default="georsclip")
    refine.add_argument("--clusters", type=int, default=32)
    refine.add_argument("--epochs", type=int, default=200)
    refine.add_argument("--lr", type=float, default=1e-2)
    refine.add_argument("--l2", type=float, default=1e-4)
    refine.add_argument("--momentum", type=float, default=0.0)
    refine.add_argument("--batch-size", type=int, default=None)
    refine.add_argument("--linkage", choices=LINKAGES, default="ward")
    refine.add_argument("--freeze-map", action="store_true")
    refine.add_argument("--holdout", type=float, default=0.0)
    refine.add_argument("--seed", type=int, required=True)
    refine.add_argument("--out-dir", required=True, metavar="DIR")
    refine.set_defaults(handler=commands.cmd_refine)

    # compose
    compose = subparsers.add_parser("compose", help="Concatenate compressed slots into one matrix.")
    compose.add_argument("--manifest", required=True, metavar="JSON")
    compose.add_argument("--layout", default="default", metavar="default|JSON")
    compose.add_argument("--normalize-slots", action="store_true")
    compose.add_argument("--out", required=True, metavar="EMB")
    compose.set_defaults(handler=commands.cmd_compose)

    # evaluate
    evaluate = subparsers.add_parser("evaluate", help="Bias-free probes and task-balanced scoring.")
    evaluate.add_argument("--task", action="append", required=True, metavar="JSON")
    evaluate.add_argument("--leaderboard", default=None, metavar="CSV")
    evaluate.add_argument("--team", default="ours")
    evaluate.add_argument("--out", required=True, metavar="JSON")
    evaluate.set_defaults(handler=commands.cmd_evaluate)

    # adapt
    adapt = subparsers.add_parser("adapt", help="Tile first-layer conv weights to more channels.")
    adapt.add_argument("--in", dest="input", required=True, metavar="CW4D")
    adapt.add_argument("--target-in", type=int, required=True)
    adapt.add_argument("--scale-policy", choices=["none", "preserve_sum"], default="none")
    adapt.add_argument("--out", required=True, metavar="CW4D")
    adapt.set_defaults(handler=commands.cmd_adapt)

    # caption
    caption = subparsers.add_parser("caption", help="Text captions from sample metadata.")
    caption.add_argument("--metadata", required=True, metavar="CSV")
    caption.add_argument("--template", choices=["latlon", "regression"], required=True)
    caption.add_argument("--decimals", type=int, default=1)
    caption.add_argument("--corrected-spelling", action="store_true")
    caption.add_argument("--out", required=True, metavar="TXT")
    caption.set_defaults(handler=commands.cmd_caption)

    # pipeline
    pipeline = subparsers.add_parser("pipeline", help="Full compress -> refine -> compose run.")
    pipeline.add_argument("--config", required=True, metavar="JSON|TOML")
    pipeline.add_argument("--seed", type=int, default=None)
    pipeline.add_argument("--output-dir", default=None, metavar="DIR")
    pipeline.set_defaults(handler=commands.cmd_pipeline)

    # verify
    verify = subparsers.add_parser("verify", help="Re-hash the files named by a provenance record.")
    verify.add_argument("--provenance", required=True, metavar="JSON")
    verify.set_defaults(handler=commands.cmd_verify)

    return parser


def _emit_error(error: GeoEmbedError, command: str) -> None:
    payload = error.to_dict()
    payload["stage"] = payload.get("stage") or command
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help/--version
        return e.code if isinstance(e.code, int) else EXIT_USAGE_ERROR

    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as e:
        _emit_error(ConfigError(f"Invalid parameters: {e}"), args.command)
        return EXIT_DOMAIN_ERROR
    except GeoEmbedError as e:
        logger.error(f"'{args.command}' failed: [{e.code}] {e}")
        _emit_error(e, args.command)
        return EXIT_DOMAIN_ERROR
    except OSError as e:
        logger.error(f"'{args.command}' failed on I/O: {e}")
        _emit_error(StoreIOError(f"{e.filename or ''}: {e.strerror or e}"), args.command)
        return EXIT_DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
