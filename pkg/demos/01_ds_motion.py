"""Dynamical-system actions: the velocity field and closed-loop tracking.

A DS action is an attractor pose plus diagonal negative-definite dynamics.
The reference velocity at any pose is A @ d(pose, attractor), so the field
flows exponentially toward the attractor.  Here we sample a few start
poses, follow the field open-loop, then track it closed-loop with the
impedance controller and compare convergence times.
"""

import numpy as np

from nudgesim.ds_action import DSAction, DynamicsRanges, reference_velocity
from nudgesim.pose_math import Pose, integrate_pose, pose_difference, quat_from_axis_angle
from nudgesim.sim import track_ds

attractor = Pose([0.5, 0.2, 0.4], quat_from_axis_angle([0, 0, 1], 0.6))
action = DSAction(attractor, DynamicsRanges().midpoint())

print("reference velocities at a few poses (linear block, m/s):")
for offset in ([0.4, 0, 0], [0, -0.3, 0.2], [0.05, 0.05, 0]):
    x = Pose(attractor.position + offset, attractor.orientation)
    tw = reference_velocity(action, x)
    print(f"  offset {np.round(offset, 2)} -> v = {np.round(tw.linear, 3)}")

print("\nopen-loop integration at 5 ms steps:")
x = Pose([0.0, -0.3, 0.1], quat_from_axis_angle([1, 0, 0], 1.2))
t = 0.0
while np.linalg.norm(pose_difference(x, attractor)) > 1e-3 and t < 60.0:
    x = integrate_pose(x, reference_velocity(action, x), 0.005)
    t += 0.005
print(f"  reached the attractor region in {t:.2f} simulated seconds")

print("\nclosed-loop tracking (200 Hz impedance controller + 1 kg plant):")
rng = np.random.default_rng(3)
for i in range(5):
    start = Pose(rng.uniform(-0.5, 0.5, 3) + [0.5, 0.2, 0.4])
    t_conv, plant = track_ds(action, start)
    err = np.linalg.norm(plant.pose.position - attractor.position)
    print(f"  run {i}: converged in {t_conv:5.2f} s, final position error {err:.2e} m")
