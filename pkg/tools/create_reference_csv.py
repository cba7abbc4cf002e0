# tools/create_reference_csv.py
import csv
from pathlib import Path

DEFAULT_PATH = Path(__file__).resolve().parent.parent / "data" / "reference_optima.csv"

FIELDS = ["case", "strategy", "N", "M", "F_max", "Jtau", "J0", "h0", "h", "tier", "convention"]


def _row(case, strategy, N, M, f_max, jtau, knob, h, tier="fast", convention=""):
    # convention: "<spectators>/<target>" that reproduced F_max, blank until one has been matched
    # S1 scans J0 with h0 = 0, S2 scans h0 with J0 = J
    j0, h0 = (knob, 0) if strategy == "S1" else (1, knob)
    return {
        "case": case, "strategy": strategy, "N": N, "M": M, "F_max": f_max, "Jtau": jtau,
        "J0": j0, "h0": h0, "h": ";".join(str(x) for x in h), "tier": tier, "convention": convention,
    }


ROWS = [
    # M = 3 pairs over chains of growing length
    _row("m3_n5_s1", "S1", 5, 3, 0.978, 446, 0.04, [0.4, -0.3, 0.35]),
    _row("m3_n10_s1", "S1", 10, 3, 0.968, 438, 0.04, [0.5, -0.1, 0.4], "slow"),
    _row("m3_n15_s1", "S1", 15, 3, 0.952, 476, 0.04, [0.2, -1.2, 0.6], "slow"),
    _row("m3_n20_s1", "S1", 20, 3, 0.947, 435, 0.04, [0.35, -0.25, 0.05], "slow"),
    _row("m3_n5_s2", "S2", 5, 3, 0.977, 459, 26, [0.5, -1.1, 1.1], convention="zero/calibrated"),
    _row("m3_n10_s2", "S2", 10, 3, 0.963, 472, 25, [0, -0.7, 1.2], "slow"),
    _row("m3_n15_s2", "S2", 15, 3, 0.947, 482, 26, [0.2, -0.7, 1], "slow"),
    _row("m3_n20_s2", "S2", 20, 3, 0.919, 500, 28, [1, -0.6, 1.2], "slow"),
    # N = 4 chain carrying M = 1..4 pairs
    _row("n4_m1_s1", "S1", 4, 1, 0.996, 482, 0.04, [0.1], convention="plus/calibrated"),
    _row("n4_m2_s1", "S1", 4, 2, 0.970, 458, 0.04, [0.05, -0.15]),
    _row("n4_m3_s1", "S1", 4, 3, 0.969, 458, 0.04, [0.15, -0.25, 0.05]),
    _row("n4_m4_s1", "S1", 4, 4, 0.945, 365, 0.05, [0.1, -1.4, 1.2, -1]),
    _row("n4_m1_s2", "S2", 4, 1, 0.991, 489, 26, [0.25], convention="plus/calibrated"),
    _row("n4_m2_s2", "S2", 4, 2, 0.967, 376, 23, [0.4, -0.25]),
    _row("n4_m3_s2", "S2", 4, 3, 0.956, 474, 24, [0, -1.4, 1.5]),
    _row("n4_m4_s2", "S2", 4, 4, 0.925, 391, 25, [0.4, -1.3, 1.4, -0.3], convention="plus/calibrated"),
]


def ensure_parent(path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)


def write_csv(path: Path):
    ensure_parent(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=FIELDS)
        writer.writeheader()
        writer.writerows(ROWS)
    print(f"✅ Wrote {len(ROWS)} rows to {path}")


if __name__ == "__main__":
    write_csv(DEFAULT_PATH)
