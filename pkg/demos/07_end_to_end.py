"""
End to end: simulate a campaign, analyze it, read the report
============================================================

The pipeline ties the previous steps together in a fixed order: buffer
table -> outlier screen -> per-image summary and normality -> per-image
ANOVA -> precision block. Everything is seeded, so the same inputs and
configuration give byte-identical reports.

The same two steps are available from the command line:

    parceltol simulate --config sim.json
    parceltol analyze  --config analyze.json --seed 7
    parceltol validate --config analyze.json
"""

import json
import tempfile
from pathlib import Path

from parceltol import run_analyze, run_simulate
from parceltol.fileio import config_from_dict

workdir = Path(tempfile.mkdtemp(prefix="parceltol_demo_"))
print("working in", workdir)

# 1. Simulate: a plan fully describes the campaign and its error structure.
sim_config = config_from_dict(
    {
        "simulation": {
            "n_parcels": 40,
            "replicates": 3,
            "master_seed": 11,
            "operators": [
                {"id": "op1", "bias_m": 0.0, "sd_m": 1.0, "skill": "Skilled"},
                {"id": "op2", "bias_m": 0.3, "sd_m": 0.9, "skill": "Skilled"},
                {"id": "op3", "bias_m": -0.5, "sd_m": 1.4, "skill": "Unskilled"},
            ],
            "images": [
                {"id": "ortho", "kind": "orthophoto", "gsd_m": 0.5},
                {"id": "stereo", "kind": "panchromatic", "gsd_m": 2.0, "noise_multiplier": 2.0},
            ],
            "contamination_rate": 0.02,
        },
        "output_dir": str(workdir / "sim"),
    }
)
sim = run_simulate(sim_config)
print(f"simulated {sim.n_observations} observations "
      f"({len(sim.contaminated)} contaminated) -> {sim.observations_csv}")

# 2. Analyze the emitted files. The seed drives every Monte Carlo step.
analyze_config = config_from_dict(
    {
        "observations_csv": sim.observations_csv,
        "parcels_geojson": sim.parcels_geojson,
        "output_dir": str(workdir / "out"),
        "seed": 7,
        "outlier_max_rounds": 2,
        "model_terms": ["operator", "image", "size", "shape", "visibility", "land_cover"],
    }
)
report = run_analyze(analyze_config)
print("\nwrote:")
for path in report.paths:
    print("  ", path)

# 3. The JSON report is the machine-readable product; a text rendering of
# the same numbers sits next to it.
data = json.loads(Path(workdir / "out" / "report.json").read_text())
print("\nflagged outliers:", data["outliers"]["flagged_total"], "of",
      data["outliers"]["total_records"])
for image_id, block in sorted(data["images"].items()):
    d, p = block["distribution"], block["precision"]
    print(f"image {image_id}: mean {d['mean']:+.3f} m, sd {d['std_dev']:.3f} m, n={d['n']}")
    print(f"  reproducibility limit {p['reproducibility_limit']:.2f} m, "
          f"critical difference {p['critical_difference']:.2f} m")

print("\ntext report preview:")
print("\n".join(Path(workdir / "out" / "report.txt").read_text().splitlines()[:12]))
