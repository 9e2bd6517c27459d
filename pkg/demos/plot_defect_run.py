"""
A run with defects
==================

Forty frames of filament pass the gauge at 10 mm per frame.  Frames 10 to
29 are 0.15 mm too thick and frame 35 carries a dark pit on its upper
surface.  The log localises the thick section along the filament.  The
texture score is generic: it reacts to the pit, but also to the sudden
change in appearance where the thick section begins.
"""

from dataclasses import replace

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from filagauge import SynthScene, default_rig, render_frame
from filagauge.measurement import build_log, calibrate_rig, measure_frame
from filagauge.synth import Pit, profile_from_steps, with_distance

scene = SynthScene(noise_sigma=2.0, pits=(Pit(x_mm=0.5, length_mm=6.0, width_deg=40, depth=60, frame=35),))
rig = default_rig(scene)
calib = calibrate_rig(
    [([render_frame(with_distance(SynthScene(), L), i)[0] for i in range(3)], 1.75, L)
     for L in (47.0, 50.0, 53.0)], rig)

profile = profile_from_steps([{"from_frame": 10, "d_mm": 1.90}, {"from_frame": 30, "d_mm": 1.75}],
                             scene)
fms = [measure_frame(render_frame(scene, i, profile(i))[0], rig, calib) for i in range(40)]
log = build_log(fms, rig)

for d in log.defects:
    print(f"{d.reason}: {d.start_mm:.0f} .. {d.end_mm:.0f} mm")

scores = [np.nan if fm.anomaly_score is None else fm.anomaly_score for fm in log.frames]
for i, sc in enumerate(scores):
    if sc > 0.01:
        print(f"frame {i}: anomaly score {sc:.3f}")

# %%
fig, ax = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
ax[0].plot(log.lengths_mm, [fm.pooled_mean for fm in log.frames], ".-")
for lim in (1.70, 1.80):
    ax[0].axhline(lim, ls="--", c="k", lw=0.8)
ax[0].set_ylabel("diameter, mm")
ax[1].plot(log.lengths_mm, scores, ".-")
ax[1].set_ylabel("anomaly score")
ax[1].set_xlabel("filament length, mm")
fig.tight_layout()
fig.savefig("defect_run.png")
print("wrote defect_run.png")
