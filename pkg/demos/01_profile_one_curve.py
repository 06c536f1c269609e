"""Error sensitivity profile of a single hand-made curve.

Performance first improves slightly under mild corruption, then collapses
past 60%. The profile summarises this with EPC, AEPC and one slope per
monotone region.
"""

from esprofile.esp import ErrorPerformanceCurve, profile

levels = (0, 20, 40, 60, 80)
f1 = (0.62, 0.64, 0.66, 0.67, 0.31)

prof = profile(ErrorPerformanceCurve(levels, f1))
print(f"EPC  = {prof.epc.value:+.4f}  (positive: performance falls as corruption rises)")
print(f"AEPC = {prof.aepc:+.4f}  (fraction of the baseline lost over the schedule)")
for r in prof.slopes:
    kind = "direction only" if r.directional else "OLS"
    print(f"  region [{r.start:g}, {r.end:g}]  beta = {r.beta:+.5f} per point ({kind})")
