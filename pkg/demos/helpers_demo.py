"""Small shared builders for the demo scripts."""

from parceltol import OperatorErrorModel, PlanImage, SimulationPlan, generate_campaign


def toy_plan(n_parcels=12, seed=42, **overrides):
    """A small three-operator, two-image plan with mild operator bias."""
    defaults = dict(
        n_parcels=n_parcels,
        operators=(
            OperatorErrorModel(id="op1", bias_m=0.0, sd_m=1.0),
            OperatorErrorModel(id="op2", bias_m=0.4, sd_m=0.8),
            OperatorErrorModel(id="op3", bias_m=-0.4, sd_m=1.3),
        ),
        images=(
            PlanImage(id="ortho", kind="orthophoto", gsd_m=0.5, noise_multiplier=1.0),
            PlanImage(id="stereo", kind="panchromatic", gsd_m=2.0, noise_multiplier=2.0),
        ),
        replicates=3,
        master_seed=seed,
    )
    defaults.update(overrides)
    return SimulationPlan(**defaults)


def toy_campaign(**overrides):
    return generate_campaign(toy_plan(**overrides))
