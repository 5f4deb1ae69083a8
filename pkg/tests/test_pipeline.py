"""End-to-end pipeline: ordering, warnings, reports, derivability."""

import csv
import json

import numpy as np
import pytest

from parceltol import (
    InsufficientDataError,
    OperatorErrorModel,
    PlanImage,
    SimulationPlan,
    analyze_campaign,
    generate_campaign,
    run_analyze,
    run_simulate,
)
from parceltol.fileio import config_from_dict


def _plan(n_parcels=12, images=2, operators=3, replicates=3, seed=5, **overrides):
    return SimulationPlan(
        n_parcels=n_parcels,
        operators=tuple(
            OperatorErrorModel(id=f"op{i}", bias_m=0.2 * i - 0.2, sd_m=1.0) for i in range(operators)
        ),
        images=tuple(PlanImage(id=f"img{i}", noise_multiplier=1.0 + i) for i in range(images)),
        replicates=replicates,
        master_seed=seed,
        **overrides,
    )


def _analyze_config(**overrides):
    base = dict(seed=1, outlier_mc_samples=4000, normality_mc_samples=2000)
    base.update(overrides)
    return config_from_dict(base)


def test_report_limits_follow_rule_of_thumb_identity():
    campaign = generate_campaign(_plan())
    data, _ = analyze_campaign(campaign, _analyze_config())
    for image_block in data["images"].values():
        precision = image_block["precision"]
        assert precision["reproducibility_limit"] == pytest.approx(
            2.8 * precision["sd_reproducibility"], rel=1e-12
        )
        assert precision["repeatability_limit"] == pytest.approx(
            2.8 * precision["sd_repeatability"], rel=1e-12
        )


def test_single_image_campaign_drops_image_term_with_warning():
    campaign = generate_campaign(_plan(images=1))
    data, _ = analyze_campaign(campaign, _analyze_config())
    assert any("'image' dropped" in w for w in data["warnings"])
    anova = data["images"]["img0"]["anova"]
    assert anova is not None
    assert all(row["term"] != "image" for row in anova["terms"])


def test_report_json_deterministic(tmp_path):
    """Same inputs and config give byte-identical machine-readable reports."""
    campaign = generate_campaign(_plan())
    blobs = []
    for run in ("a", "b"):
        config = _analyze_config(output_dir=str(tmp_path / run), format="json")
        report = run_analyze(config, campaign=campaign)
        blob = (tmp_path / run / "report.json").read_bytes()
        blobs.append(blob)
        assert report.data["schema_version"] == "1"
    assert blobs[0] == blobs[1]


def test_report_values_rederivable_from_buffer_table(tmp_path):
    """The emitted buffer table reproduces the report's distribution block."""
    campaign = generate_campaign(_plan())
    config = _analyze_config(output_dir=str(tmp_path), format="json")
    report = run_analyze(config, campaign=campaign)
    with open(tmp_path / "buffer_table.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(campaign.observations)
    for image_id, block in report.data["images"].items():
        retained = [float(r["buffer_m"]) for r in rows
                    if r["image_id"] == image_id and r["outlier"] == "false"]
        assert len(retained) == block["distribution"]["n"]
        assert np.isclose(np.mean(retained), block["distribution"]["mean"], rtol=1e-9)
        assert np.isclose(np.std(retained, ddof=1), block["distribution"]["std_dev"], rtol=1e-9)


def test_outlier_block_consistent_with_flags(tmp_path):
    campaign = generate_campaign(_plan(contamination_rate=0.05))
    data, records = analyze_campaign(campaign, _analyze_config())
    flagged = [r for r in records if r.outlier]
    assert data["outliers"]["flagged_total"] == len(flagged)
    assert sum(data["outliers"]["flagged_by_image"].values()) == len(flagged)


def test_normality_block_present_per_image():
    campaign = generate_campaign(_plan())
    data, _ = analyze_campaign(campaign, _analyze_config())
    for block in data["images"].values():
        assert 0.0 < block["normality"]["p_value"] <= 1.0
        assert block["normality"]["n"] == block["distribution"]["n"]


def test_provenance_block():
    campaign = generate_campaign(_plan())
    config = _analyze_config()
    data, _ = analyze_campaign(campaign, config)
    assert data["provenance"]["config_sha256"] == config.sha256()
    assert data["provenance"]["seed"] == 1
    assert data["provenance"]["tool"] == "parceltol"


def test_analyze_requires_seed():
    campaign = generate_campaign(_plan())
    from parceltol import ValidationError

    with pytest.raises(ValidationError, match="seed"):
        analyze_campaign(campaign, config_from_dict({}))


def test_analyze_single_operator_fails_cleanly():
    campaign = generate_campaign(_plan(operators=1))
    with pytest.raises(InsufficientDataError, match="operators"):
        analyze_campaign(campaign, _analyze_config())


def test_simulate_then_analyze_roundtrip(tmp_path):
    """Simulator output files feed straight into the analyzer."""
    sim_config = config_from_dict(
        {
            "simulation": {
                "n_parcels": 10,
                "replicates": 3,
                "master_seed": 3,
                "operators": [
                    {"id": "op1", "bias_m": 0.0, "sd_m": 1.0},
                    {"id": "op2", "bias_m": 0.3, "sd_m": 0.7, "skill": "Unskilled"},
                ],
                "images": [{"id": "ortho", "kind": "orthophoto", "gsd_m": 0.5}],
            },
            "output_dir": str(tmp_path / "sim"),
        }
    )
    sim_out = run_simulate(sim_config)
    assert sim_out.n_observations == 10 * 2 * 3
    analyze = config_from_dict(
        {
            "observations_csv": sim_out.observations_csv,
            "parcels_geojson": sim_out.parcels_geojson,
            "output_dir": str(tmp_path / "out"),
            "seed": 9,
            "outlier_mc_samples": 2000,
            "normality_mc_samples": 2000,
        }
    )
    report = run_analyze(analyze)
    assert set(report.data["images"]) == {"ortho"}
    assert (tmp_path / "out" / "report.json").exists()
    assert (tmp_path / "out" / "report.txt").exists()


def test_simulate_seed_override_changes_output(tmp_path):
    base = {
        "simulation": {
            "n_parcels": 4,
            "master_seed": 3,
            "operators": [{"id": "op1"}, {"id": "op2"}],
            "images": [{"id": "i"}],
        },
        "output_dir": str(tmp_path / "a"),
    }
    out1 = run_simulate(config_from_dict(base))
    base["output_dir"] = str(tmp_path / "b")
    base["seed"] = 1234
    out2 = run_simulate(config_from_dict(base))
    csv_a = open(out1.observations_csv).read()
    csv_b = open(out2.observations_csv).read()
    assert csv_a != csv_b


def test_text_report_contains_tables(tmp_path):
    campaign = generate_campaign(_plan())
    config = _analyze_config(output_dir=str(tmp_path), format="text")
    run_analyze(config, campaign=campaign)
    text = (tmp_path / "report.txt").read_text()
    for heading in ("BUFFER DISTRIBUTION BY IMAGE", "PRECISION BY IMAGE", "ANOVA", "NORMALITY"):
        assert heading in text
    assert "report.json" not in [p.name for p in tmp_path.iterdir()]
