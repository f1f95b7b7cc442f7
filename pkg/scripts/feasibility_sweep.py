"""Minimal-rate and minimal-intensity bounds over coherence times 0.1-4 ps.

    python scripts/feasibility_sweep.py configs/feasibility.json > sweep.csv
"""

import sys

from pdclhv import feasibility
from pdclhv.core import load_config
from pdclhv.io import format_csv, provenance


def main(path):
    cfg = load_config(path)
    rows = feasibility.sweep_tau(cfg, feasibility.default_tau_grid(15))
    sys.stdout.write(format_csv(provenance("feasibility-sweep", cfg.to_dict()),
                                feasibility.SWEEP_COLUMNS, rows))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "configs/feasibility.json")
