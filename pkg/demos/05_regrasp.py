"""
Regrasping towards the center of gravity
========================================

Each failed grasp tells the controller which way the object turned, and so
which side of the fingers the center of gravity is on. It moves a large
step first, then smaller ones, and once the direction flips it knows the
center lies between the last two grasps and narrows in on it.
"""

from tactile_rotation import SimObject, SimParams, init_controller, oracle_plant, plant_adapter, run_episode
from tactile_rotation.evaluate import run_closed_loop

rod = SimObject(length=0.30, cog_offset=0.085)
for name, plant in (("ground truth", oracle_plant(rod)), ("tactile pipeline", plant_adapter(rod, SimParams(seed=2)))):
    episode = run_episode(init_controller(rod.length), plant)
    print(f"{name}:")
    for step in episode.steps:
        print(f"  grasp at {step.offset_m:+.4f} m -> {step.verdict.value:20s} {step.orientation.value:9s} "
              f"{step.angle_deg:5.1f} deg")
    print(f"  stable after {episode.regrasp_count} regrasps, "
          f"{abs(episode.final_offset - rod.cog_offset) * 1000:.1f} mm from the center of gravity\n")

report = run_closed_loop(SimObject(), n_episodes=20, seed=5)
for key, value in report.summary_items():
    print(f"{key}: {value}")
