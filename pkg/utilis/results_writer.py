import hashlib
import json
import os

import pandas as pd

from utilis.logger import get_logger

logger = get_logger(__name__)

FLOAT_FORMAT = "%.12g"


def config_hash(raw: dict, seed: int) -> str:
    """First 12 hex digits of sha256(canonical config JSON + seed)."""
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(f"{canonical}|{seed}".encode("utf-8")).hexdigest()[:12]


def artifact_path(out_dir: str, command: str, digest: str, ext: str, suffix: str = "") -> str:
    os.makedirs(out_dir, exist_ok=True)
    name = f"{command}_{digest}{'_' + suffix if suffix else ''}.{ext}"
    return os.path.join(out_dir, name)


def write_table(path: str, rows, columns=None) -> str:
    """CSV with 12 significant digits, '.' decimal, no index."""
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"📄 Wrote {len(frame)} rows to {path}")
    return path


def write_json(path: str, payload: dict) -> str:
    with open(path, mode="w", encoding="utf-8", newline="\n") as file:
        file.write(json.dumps(payload, sort_keys=True, indent=2))
        file.write("\n")
    logger.info(f"📄 Wrote {path}")
    return path
