"""CSV/GeoJSON ingestion, config parsing, round trips."""

import json

import pytest

from parceltol import (
    Config,
    OperatorErrorModel,
    PlanImage,
    SimulationPlan,
    ValidationError,
    config_from_dict,
    generate_campaign,
    load_campaign,
    load_config,
    parse_observations_csv,
    parse_parcels_geojson,
    plan_from_dict,
    plan_to_dict,
    write_observations_csv,
    write_parcels_geojson,
)
from parceltol.fileio import write_campaign_meta
from parceltol.robust_stats import OutlierGrouping

VALID_CSV = """parcel_id,operator_id,image_id,replicate,measured_area_m2
P1,op1,img1,1,10400.0
P1,op1,img1,2,10200.5
P1,op2,img1,1,9900.25
"""


def _geojson_feature(fid="P1", coords=None, holes=None, **props):
    ring = coords or [[0, 0], [100, 0], [100, 100], [0, 100], [0, 0]]
    rings = [ring] + (holes or [])
    properties = {"id": fid, "shape_class": "Simple", "land_cover": "BareSoil",
                  "visibility": "GoodAll"}
    properties.update(props)
    return {"type": "Feature", "properties": properties,
            "geometry": {"type": "Polygon", "coordinates": rings}}


def _write_geojson(path, features):
    path.write_text(json.dumps({"type": "FeatureCollection", "features": features}))
    return path


# ---------------------------------------------------------------------------
# observations CSV
# ---------------------------------------------------------------------------


def test_parse_valid_csv(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(VALID_CSV)
    obs = parse_observations_csv(p)
    assert len(obs) == 3
    assert obs[0].measured_area_m2 == 10400.0
    assert obs[2].key() == ("P1", "op2", "img1", 1)


def test_parse_duplicate_key_names_both_rows(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(VALID_CSV + "P1,op1,img1,1,10100\n")
    with pytest.raises(ValidationError, match="rows 2 and 5"):
        parse_observations_csv(p)


def test_parse_comma_decimal_rejected_with_row(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(
        "parcel_id,operator_id,image_id,replicate,measured_area_m2\n"
        'P1,op1,img1,1,"10,4"\n'
    )
    with pytest.raises(ValidationError, match="row 2"):
        parse_observations_csv(p)


def test_parse_missing_column(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("parcel_id,operator_id,image_id,replicate\nP1,op1,img1,1\n")
    with pytest.raises(ValidationError, match="measured_area_m2"):
        parse_observations_csv(p)


def test_parse_negative_area_row_addressed(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(VALID_CSV + "P2,op1,img1,1,-4.0\n")
    with pytest.raises(ValidationError, match="row 5"):
        parse_observations_csv(p)


def test_parse_bad_replicate(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(VALID_CSV.replace("img1,2", "img1,two"))
    with pytest.raises(ValidationError, match="replicate"):
        parse_observations_csv(p)


def test_csv_roundtrip_exact(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text(VALID_CSV)
    obs = parse_observations_csv(p)
    q = tmp_path / "copy.csv"
    write_observations_csv(q, obs)
    assert parse_observations_csv(q) == obs


# ---------------------------------------------------------------------------
# parcels GeoJSON
# ---------------------------------------------------------------------------


def test_parse_valid_feature(tmp_path):
    p = _write_geojson(tmp_path / "p.geojson", [_geojson_feature()])
    parcels = parse_parcels_geojson(p)
    assert len(parcels) == 1
    assert parcels[0].area_m2 == 10_000.0
    assert parcels[0].perimeter_m == 400.0
    assert parcels[0].labels.shape.value == "Simple"


def test_hole_rejected(tmp_path):
    feature = _geojson_feature(holes=[[[10, 10], [20, 10], [20, 20], [10, 20], [10, 10]]])
    p = _write_geojson(tmp_path / "p.geojson", [feature])
    with pytest.raises(ValidationError, match="holes"):
        parse_parcels_geojson(p)


def test_multipolygon_rejected(tmp_path):
    feature = _geojson_feature()
    feature["geometry"]["type"] = "MultiPolygon"
    p = _write_geojson(tmp_path / "p.geojson", [feature])
    with pytest.raises(ValidationError, match="MultiPolygon"):
        parse_parcels_geojson(p)


def test_unknown_land_cover_lists_allowed(tmp_path):
    p = _write_geojson(tmp_path / "p.geojson", [_geojson_feature(land_cover="Wheat")])
    with pytest.raises(ValidationError) as err:
        parse_parcels_geojson(p)
    message = str(err.value)
    for allowed in ("BareSoil", "GreenCover", "Marsh", "OliveTrees", "Orchard", "Pasture", "Vineyard"):
        assert allowed in message
    assert "Wheat" in message


def test_missing_property_rejected(tmp_path):
    feature = _geojson_feature()
    del feature["properties"]["visibility"]
    p = _write_geojson(tmp_path / "p.geojson", [feature])
    with pytest.raises(ValidationError, match="visibility"):
        parse_parcels_geojson(p)


def test_invalid_geometry_names_feature(tmp_path):
    bow_tie = [[0, 0], [1, 1], [1, 0], [0, 1], [0, 0]]
    p = _write_geojson(tmp_path / "p.geojson", [_geojson_feature(fid="BAD", coords=bow_tie)])
    with pytest.raises(ValidationError, match="BAD"):
        parse_parcels_geojson(p)


def test_simulated_campaign_roundtrip(tmp_path):
    """parse(emit(campaign)) reproduces the campaign exactly."""
    plan = SimulationPlan(
        n_parcels=8,
        operators=(
            OperatorErrorModel(id="op1", bias_m=0.1, sd_m=0.8),
            OperatorErrorModel(id="op2", bias_m=-0.2, sd_m=1.1),
        ),
        images=(PlanImage(id="imgA", kind="orthophoto", gsd_m=0.5),
                PlanImage(id="imgB", kind="stereo", gsd_m=2.0, noise_multiplier=2.0)),
        replicates=2,
        master_seed=7,
    )
    campaign = generate_campaign(plan)
    write_observations_csv(tmp_path / "observations.csv", list(campaign.observations))
    write_parcels_geojson(tmp_path / "parcels.geojson", list(campaign.parcels))
    write_campaign_meta(tmp_path / "campaign_meta.json", campaign)
    loaded = load_campaign(tmp_path / "observations.csv", tmp_path / "parcels.geojson")
    assert loaded.parcels == campaign.parcels
    assert loaded.operators == campaign.operators
    assert loaded.images == campaign.images
    assert sorted(o.key() for o in loaded.observations) == sorted(
        o.key() for o in campaign.observations
    )
    loaded_areas = {o.key(): o.measured_area_m2 for o in loaded.observations}
    assert all(loaded_areas[o.key()] == o.measured_area_m2 for o in campaign.observations)


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def test_config_defaults_and_enum_parsing():
    config = config_from_dict(
        {"outlier_grouping": "parcel_image_operator", "tolerance_mode": "exact", "seed": 3}
    )
    assert config.outlier_grouping is OutlierGrouping.PARCEL_IMAGE_OPERATOR
    assert config.tolerance_mode.value == "exact"
    assert config.require_seed() == 3


def test_config_unknown_field_rejected():
    with pytest.raises(ValidationError, match="unknown config field"):
        config_from_dict({"speling_mistake": 1})


def test_config_seed_required_for_mc():
    with pytest.raises(ValidationError, match="seed"):
        Config().require_seed()


def test_config_model_terms_lists_become_tuples():
    config = config_from_dict({"model_terms": ["operator", ["image", "size"], "image", "size"]})
    assert config.model_terms == ("operator", ("image", "size"), "image", "size")


def test_config_relative_paths_resolve_against_config_dir(tmp_path):
    cfg = tmp_path / "conf" / "run.json"
    cfg.parent.mkdir()
    cfg.write_text(json.dumps({"observations_csv": "../data/obs.csv", "seed": 1}))
    config = load_config(cfg)
    assert config.observations_csv == str(tmp_path / "conf" / ".." / "data" / "obs.csv")


def test_config_hash_stable_and_sensitive():
    a = config_from_dict({"seed": 1})
    b = config_from_dict({"seed": 1})
    c = config_from_dict({"seed": 2})
    assert a.sha256() == b.sha256()
    assert a.sha256() != c.sha256()


def test_plan_dict_roundtrip():
    plan = SimulationPlan(
        n_parcels=5,
        operators=(OperatorErrorModel(id="op1", bias_m=0.25, sd_m=1.5),),
        images=(PlanImage(id="i", kind="k", gsd_m=2.0, noise_multiplier=1.5),),
        replicates=4,
        master_seed=11,
        dropout_rate=0.05,
        contamination_rate=0.016,
        contamination_magnitude_m=(10.0, 30.0),
    )
    assert plan_from_dict(plan_to_dict(plan)) == plan


def test_plan_from_dict_missing_field():
    with pytest.raises(ValidationError, match="missing required field"):
        plan_from_dict({"operators": [], "images": []})
