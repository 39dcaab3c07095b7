"""
Plücker lines and their image
=============================

A 3D line is stored as the pair ``(n, v)``: ``v`` runs along the line and
``n = p1 x p2`` is normal to the plane through the line and the origin.
This demo builds a line, moves it into a camera frame and projects it.
"""
# %%
import numpy as np

from plkcalib import CameraIntrinsics, ExtrinsicPose, plucker_from_endpoints
from plkcalib.geometry import back_project_direction, exp_so3, project_line, transform_line

p1, p2 = np.array([4.0, -1.0, 0.5]), np.array([6.0, 2.0, 1.5])
L = plucker_from_endpoints(p1, p2)
print("n =", L.n, " v =", L.v, " n.v =", L.n @ L.v)
print("distance to origin: %.3f m" % L.distance)

# %%
# Move the line into the camera frame.  Transforming the Plücker pair gives
# the same line as transforming the two endpoints first.
pose = ExtrinsicPose(exp_so3([0.0, -np.pi / 2, 0.0]) @ exp_so3([np.pi / 2, 0.0, 0.0]),
                     [0.1, -0.2, 0.05])
Lc = transform_line(pose, L)
check = plucker_from_endpoints(pose.transform_point(p1), pose.transform_point(p2))
print("transport mismatch:", np.abs(Lc.n - check.n).max())

# %%
# The image line is ``K n_C`` and both projected endpoints lie on it.
intr = CameraIntrinsics(500, 500, 320, 240)
l = project_line(intr.K, Lc)
for p in (p1, p2):
    x = np.append(intr.project_point(pose.transform_point(p)), 1.0)
    print("endpoint pixel", x[:2].round(2), "distance to line %.2e px" % (abs(x @ l) / np.hypot(*l[:2])))

# %%
# Back-projecting the image line recovers the direction of ``n_C``.
m = back_project_direction(intr.K, l)
sin_angle = np.linalg.norm(np.cross(m, Lc.n)) / (np.linalg.norm(m) * np.linalg.norm(Lc.n))
print("sin angle(m, n_C) = %.1e" % sin_angle)
