import hashlib
import json

from . import __version__


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def header_line(cfg_hash: str, seed: int) -> str:
    return f"dglgan {__version__} config={cfg_hash} seed={seed}"
