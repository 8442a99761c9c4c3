import hashlib

STAGES = ("compress", "quality", "search", "refine", "evaluate", "adapt")


def derive_stage_seed(seed: int, stage: str) -> int:
    """First four bytes (little-endian) of sha256("{seed}:{stage}")."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def stage_seeds(seed: int, stages=STAGES) -> dict:
    return {stage: derive_stage_seed(seed, stage) for stage in stages}
