"""
Cleaning up detected segments
=============================

Line detectors split long edges into fragments.  Fragments whose
endpoints are within 5 px and whose directions agree to 2 degrees are
merged, then anything shorter than 20 px is dropped.
"""
# %%
import numpy as np

from plkcalib.geometry import LineSegment2D
from plkcalib.preprocess import SegmentSet, merge_all

rng = np.random.default_rng(0)
frags = []
for angle, origin in ((10, (50, 100)), (95, (400, 50)), (140, (600, 300))):
    d = np.array([np.cos(np.radians(angle)), np.sin(np.radians(angle))])
    t = 0.0
    for _ in range(4):
        n = rng.uniform(30, 70)
        frags.append(LineSegment2D(np.array(origin) + t * d, np.array(origin) + (t + n) * d))
        t += n + rng.uniform(1, 4)
frags.append(LineSegment2D.from_pixels(300, 400, 312, 405))   # short clutter

out = merge_all(SegmentSet(frags))
print("%d fragments -> %d segments" % (len(frags), len(out)))
for s in out.segments:
    print("  (%.1f, %.1f) -> (%.1f, %.1f), %.1f px" % (*s.as_tuple(), s.length))
