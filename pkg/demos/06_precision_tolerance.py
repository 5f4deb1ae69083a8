"""
Repeatability, reproducibility and the technical tolerance
==========================================================

The operational question behind all of this: how different may two area
measurements be before we suspect a real problem, and how far may a
measured area sit from the reference before we reject a claim? Within each
parcel, operators form a one-way layout; pooling over parcels gives

  sd_repeatability   - replicate noise of one operator,
  sd_reproducibility - that plus the between-operator spread.

Multiplying by 2.8 (the rounded 1.96·√2) turns an SD into a 95% limit on
the absolute difference of two results. The critical difference bounds the
gap between a replicated mean and the reference value.
"""

import numpy as np

from parceltol import (
    LimitMode,
    build_buffer_table,
    critical_difference,
    precision_report,
    repeatability_limit,
    reproducibility_limit,
    variance_components,
)
from helpers_demo import toy_campaign

# A hand-checkable case first: two operators, two replicates each.
from parceltol import BufferRecord

records = [
    BufferRecord("P1", "A", "img", 1, 0.0), BufferRecord("P1", "A", "img", 2, 2.0),
    BufferRecord("P1", "B", "img", 1, 4.0), BufferRecord("P1", "B", "img", 2, 6.0),
]
comps = variance_components(records)
print("within-operator variance :", comps.sd_repeatability**2)
print("between-operator variance:", comps.sd_between_operators**2)
print("reproducibility SD       :", comps.sd_reproducibility)

# SD -> 95% limit, both as the 2.8 rule of thumb and the exact z·sd·√n form.
sd = 1.02
print("\nrule of thumb limit:", reproducibility_limit(sd))
print("exact 95% limit    :", reproducibility_limit(sd, prob=0.95, n=2, mode=LimitMode.EXACT))

# Critical difference for 5 operators with 3 replicates each.
print("critical difference:", round(critical_difference(1.02, 0.92, 5, [3] * 5), 3), "m")

# On a full campaign, precision_report produces the per-image block.
campaign = toy_campaign(n_parcels=100)
table = build_buffer_table(campaign)
print("\nper-image precision:")
for s in precision_report(table):
    print(f"  image {s.image_id}: bias {s.bias:+.3f} m")
    print(f"    sd_r {s.sd_repeatability:.3f} -> repeatability limit {s.repeatability_limit:.3f} m")
    print(f"    sd_R {s.sd_reproducibility:.3f} -> reproducibility limit {s.reproducibility_limit:.3f} m")
    print(f"    critical difference {s.critical_difference:.3f} m "
          f"(p={s.operator_count}, replicate counts {s.replicate_counts})")

# The stereo image doubles every operator's noise in this plan, so its
# limits should come out roughly twice as wide as the orthophoto's.
