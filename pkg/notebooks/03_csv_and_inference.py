"""Estimate from a CSV file with confidence intervals, the way an applied user would.

Run with ``python3 notebooks/03_csv_and_inference.py``. Writes into a
temporary directory and cleans up afterwards.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from terc import EstimateConfig, estimate, load_csv

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    data = tmp / "firms.csv"
    sim_cfg = tmp / "sim.json"
    sim_cfg.write_text(json.dumps({"n_units": 500, "n_periods": 3}))
    # The CLI writes a simulated panel in the long format: id, t, y, x..., z...
    subprocess.run([sys.executable, "-m", "terc.cli", "simulate", "--config", str(sim_cfg),
                    "--out", str(data), "--seed", "7"], check=True)
    print(data.read_text().splitlines()[0])

    # Simulated files carry no constant column; ask the loader to append one.
    panel = load_csv(data, add_intercept=True)
    # beta(x) is evaluated at the lower and upper quartiles of both inputs;
    # grid points are full regressor vectors, intercept included.
    q1, q3 = np.quantile(panel.x[..., :2].reshape(-1, 2), [0.25, 0.75], axis=0)
    grid = [[*q1, 1.0], [*q3, 1.0]]
    config = EstimateConfig(inference=True, x_grid=grid)
    report = estimate(panel, config)
    for entry in report.to_dict()["per_period"]:
        inf = entry["inference"]
        print(f"period {entry['period_label']}: beta_bar {[round(b, 3) for b in entry['beta_bar']]}")
        print(f"   95% CI lo {[round(b, 3) for b in inf['ci_lo']]}")
        print(f"   95% CI hi {[round(b, 3) for b in inf['ci_hi']]}")
    first = report.to_dict()["per_period"][0]
    for item in first["beta_x"]:
        print(f"beta(x) at {[round(v, 3) for v in item['x']]}: {[round(b, 3) for b in item['beta']]}, "
              f"se {[round(s, 3) for s in item['inference']['se']]}")

    # The same run from the command line, with the configuration in a JSON file.
    cfg = tmp / "config.json"
    cfg.write_text(json.dumps({"inference": True}))
    out = tmp / "report.json"
    subprocess.run([sys.executable, "-m", "terc.cli", "estimate", "--data", str(data), "--config", str(cfg),
                    "--out", str(out)], check=True)
    print("CLI pooled beta_bar:", [round(b, 4) for b in json.loads(out.read_text())["pooled_beta_bar"]])
