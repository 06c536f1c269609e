"""Configure, run, analyse and plot a small experiment.

Heavy noise on the informative column is the positive control; the same
noise on a pure-noise column should not be retained by the filter.
Writes everything under ./demo-run and the canonical plot to demo-run/signal.svg.
"""

import json
import sys
from pathlib import Path

from esprofile.cli import main
from esprofile.synthetic import degrading_feature
from esprofile.tabular import write_csv

root = Path("demo-run")
root.mkdir(exist_ok=True)
write_csv(degrading_feature(400, seed=0), root / "data.csv")
noisy = {"tag": "noisy_values", "noise_scale": 5.0}
(root / "specs.json").write_text(json.dumps([{"error_type": noisy, "features": [f]} for f in ("signal", "noise")]))

steps = [
    ["configure", "--non-interactive", "--config", str(root / "config.json"), "--dataset", str(root / "data.csv"),
     "--target", "y", "--strategy", "custom", "--spec-file", str(root / "specs.json"),
     "--models", "LR", "NB", "--repetitions", "10", "--out", "store"],
    ["run", "--config", str(root / "config.json"), "--workers", "2", "--resume"],
    ["analyze", str(root / "store"), "--delta", "0.03", "0.05", "0.10"],
]
for argv in steps:
    print("$ esprofile", " ".join(argv))
    if main(argv):
        sys.exit(1)

analysis = json.loads((root / "store" / "analysis.json").read_text())
for sc in analysis["scenarios"]:
    v = sc["verdicts"]["0.05"]
    print(f"{sc['scenario_id']} {sc['model']:3s} {sc['features'][0]:7s} AEPC {sc['mean_aepc']:+.3f} "
          f"adj p {v['adjusted_p']:.4f} retained {v['retained']}")

sid = next(s["scenario_id"] for s in analysis["scenarios"] if s["features"] == ["signal"])
main(["report", str(root / "store"), sid, "--out", str(root / "signal.svg")])
print("canonical plot written to", root / "signal.svg")
