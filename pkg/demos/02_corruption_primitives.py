"""What each error type does to a small table.

Counts are floor(level / 100 * eligible cells) and every higher level
contains the cells corrupted at the lower ones.
"""

import numpy as np

from esprofile.corrupt import CorruptionSpec, ErrorType, corrupt
from esprofile.synthetic import sessions

d0 = sessions(200, seed=3)
for tag, feats in [("noisy_values", ("PageValues",)), ("outliers", ("ExitRates",)),
                   ("missing_values", ("BounceRates",)), ("mislabeling", ()), ("duplication", ())]:
    spec = CorruptionSpec(ErrorType(tag), feats)
    sizes = []
    for level in spec.schedule.levels:
        out, trace = corrupt(d0, spec, level, seed=7)
        sizes.append(len(trace.touched_cells) + trace.added_rows)
    print(f"{tag:15s} touched per level {sizes}")

# the clean table is never modified
print("clean PageValues mean unchanged:", np.isclose(d0.column("PageValues").mean(), sessions(200, seed=3).column("PageValues").mean()))
