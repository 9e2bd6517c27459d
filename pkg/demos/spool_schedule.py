"""
Winding a spool at constant feed
================================

Each layer sits one filament diameter further out, so the spool has to
slow down layer by layer to keep the linear feed constant.
"""

from filagauge import SpoolSpec, speed_schedule, total_length

spec = SpoolSpec(R=50.0, n=10, m=3, d=2.0)
print(f"total length {total_length(spec):.3f} mm")

sched = speed_schedule(spec, feed_rate=10.0)
for k, (w, t, end) in enumerate(zip(sched.omega_rev_s, sched.durations_s, sched.switch_times_s), 1):
    print(f"layer {k}: {w * 60:.3f} rpm for {t:.1f} s (done at {end:.1f} s)")
