"""
Ranking candidate controls before fitting
=========================================

With many candidate series it pays to shortlist before running the
sampler.  Each candidate is scored by Pearson correlation and by dynamic
time warping distance to the treated series over the pre-period; the two
ranks are averaged.
"""

import numpy as np

from impact_bsts.prescreen import dtw_distance, rank_controls
from impact_bsts.synth import ControlRecipe, SynthSpec, generate

###############################################################################
# DTW aligns series that share a shape but are shifted in time.
a = np.array([0.0, 0.0, 1.0, 3.0, 1.0, 0.0, 0.0])
b = np.roll(a, 1)
print("euclidean-style sum |a-b|:", np.abs(a - b).sum())
print("DTW distance:", dtw_distance(a, b, standardize=False))

###############################################################################
# A panel with a few good controls hidden among noise and unrelated walks.
recipes = [ControlRecipe(f"good{i}", correlation=c) for i, c in enumerate((0.95, 0.9, 0.8))]
recipes += [ControlRecipe(f"walk{i}", source="walk") for i in range(4)]
recipes += [ControlRecipe(f"noise{i}", source="noise") for i in range(4)]
panel, _ = generate(SynthSpec(length=300, level_sd=1.0, obs_sd=0.5, controls=tuple(recipes),
                              seed=3))

report = rank_controls(panel.treated, panel.controls, max_k=4)
print(f"{'name':>8s} {'pearson':>8s} {'dtw':>8s} {'rank':>6s}  selected")
for s in report.scores:
    print(f"{s.name:>8s} {s.pearson:8.3f} {s.dtw:8.1f} {s.combined_rank:6.1f}  {s.selected}")
