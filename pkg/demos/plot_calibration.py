"""
The calibration line
====================

The mirror image drifts away from the main image as the filament moves
toward the camera, so their separation tells the distance and hence the
scale.  Over a small distance range that relation is close to a straight
line; this script fits it and checks how well it carries to distances
just outside the fitted range.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from filagauge import SynthScene, default_rig, render_frame, scale_for
from filagauge.measurement import calibrate_rig, measure_frame, measure_pixels
from filagauge.synth import with_distance

scene = SynthScene()
rig = default_rig(scene)

sets = []
for L in (47.0, 50.0, 53.0):
    s = with_distance(scene, L)
    sets.append(([render_frame(s, i)[0] for i in range(3)], 1.75, L))
calib = calibrate_rig(sets, rig)
m = calib["main"]
print(f"main line through x={m.x1:.2f} px, z={m.z1:.6f} mm/px; residual {m.residual_rms:.2e}")

# %%
# Sweep the distance and compare the line with the renderer's true scale.
rows = []
for L in np.linspace(46.5, 53.5, 15):
    frame, truth = render_frame(with_distance(scene, float(L)), 0)
    x = measure_pixels(frame, rig).separation_px
    sc = scale_for(m, x)
    d = measure_frame(frame, rig, calib, with_patch=False).pooled_mean
    rows.append((L, x, sc.mm_per_px, truth.mm_per_px["main"], d, sc.extrapolated))
    print(f"L={L:5.2f}  x={x:7.2f}  scale {sc.mm_per_px:.6f} (true {truth.mm_per_px['main']:.6f})"
          f"  d={d:.4f} mm{'  extrapolated' if sc.extrapolated else ''}")

rows = np.array(rows, dtype=float)
fig, ax = plt.subplots(1, 2, figsize=(9, 3.5))
ax[0].plot(rows[:, 1], rows[:, 3], "o", label="renderer")
ax[0].plot(rows[:, 1], rows[:, 2], "-", label="fitted line")
ax[0].set_xlabel("separation, px")
ax[0].set_ylabel("main scale, mm/px")
ax[0].legend()
ax[1].plot(rows[:, 0], rows[:, 4], "o-")
ax[1].axhline(1.75, c="k", lw=0.8)
ax[1].set_xlabel("distance, mm")
ax[1].set_ylabel("pooled diameter, mm")
fig.tight_layout()
fig.savefig("calibration.png")
print("wrote calibration.png")
