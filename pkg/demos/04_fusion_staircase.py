"""Why pooling predictions works: the level-wise detection staircase.

Every configuration (checkpoint x tile size x date x variant) detects an
overlapping-but-distinct subset of fields. Pooling layers can only add
candidates, so detection climbs at every fusion level. With the calibrated
degradation preset the ladder reproduces the 18 -> 26 -> 50 -> 58 shape, and
the closed-form model predicts the same numbers.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fieldfuse.degrade import MockConfig, analytic_detection, staircase_preset, survival_mask

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

CKPTS = ["vit_b", "vit_h", "vit_l"]
SIZES = [256, 512, 768, 1024]
DATES = ["T1", "T2", "T3", "T4"]
VARIANTS = ["original", "edge_enhanced"]
N_FIELDS = 1700

deg = staircase_preset(seed=0)
surv = {
    (k, s, d, v): survival_mask(N_FIELDS, deg, MockConfig(k, s, d, v))
    for k in CKPTS
    for s in SIZES
    for d in DATES
    for v in VARIANTS
}


def detected(keys):
    return 100.0 * np.any([surv[k] for k in keys], axis=0).mean()


levels = {
    "single cell\n(T4, 512, vit_b)": detected([("vit_b", 512, "T4", "original")]),
    "checkpoints\ncombined": detected([(k, 512, "T4", "original") for k in CKPTS]),
    "+ sizes": detected([(k, s, "T4", "original") for k in CKPTS for s in SIZES]),
    "+ dates": detected(
        [(k, s, d, "original") for k in CKPTS for s in SIZES for d in DATES]
    ),
    "+ variants": detected(list(surv.keys())),
}
for name, value in levels.items():
    print(f"{name.replace(chr(10), ' '):32s} {value:5.1f}%")

analytic = {
    "checkpoints\ncombined": analytic_detection(
        deg, [MockConfig(k, 512, "T4", "original") for k in CKPTS]
    ),
    "+ sizes": analytic_detection(
        deg, [MockConfig(k, s, "T4", "original") for k in CKPTS for s in SIZES]
    ),
    "+ dates": analytic_detection(
        deg,
        [MockConfig(k, s, d, "original") for k in CKPTS for s in SIZES for d in DATES],
    ),
    "+ variants": analytic_detection(
        deg,
        [MockConfig(k, s, d, v) for k in CKPTS for s in SIZES for d in DATES for v in VARIANTS],
    ),
}
print("analytic ladder:", " -> ".join(f"{100 * v:.1f}" for v in analytic.values()))

fig, ax = plt.subplots(figsize=(8, 4.2))
names = list(levels)
ax.bar(names, [levels[n] for n in names], color="#4C78A8", label="simulated (1700 fields)")
ax.plot(
    [n for n in names if n in analytic],
    [100 * analytic[n] for n in names if n in analytic],
    "o--",
    color="#E45756",
    label="closed form",
)
ax.set_ylabel("detection accuracy (%)")
ax.set_ylim(0, 70)
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "04_staircase.png", dpi=110)
print("wrote", OUT / "04_staircase.png")
