"""A full physical-correction episode, end to end.

The mock model commands a move to the counter; two seconds in, a virtual
human drags the end effector to the stove.  Watch the confidence collapse,
the resample rate spike (prior particles flood onto scene objects), the
weighted-mean attractor migrate to the stove, and the recovered estimate
turn into a semantic correction for the transcript.

Also writes plot-ready CSV series next to this script (correction_series/).
"""

from pathlib import Path

import numpy as np

from nudgesim.cli import main as cli_main
from nudgesim.scenario import scenario_from_file
from nudgesim.sim import run_scenario

here = Path(__file__).resolve().parent
scenario_path = here.parent / "scenarios" / "correction.json"
scenario = scenario_from_file(scenario_path)
log = run_scenario(scenario)

stove_attr = np.array([0.5, 0.2, 0.25])
conf = log.by_kind("confidence_sample")
est = log.by_kind("estimate_sample")

print("t(s)   min_c  resample  |mean - stove| (m)")
for c, e in zip(conf, est):
    if abs(c.time * 2 - round(c.time * 2)) < 1e-9:  # every 0.5 s
        cmin = min(c.data["c_lin"], c.data["c_rot"])
        d = np.linalg.norm(np.array(e.data["attractor"][:3]) - stove_attr)
        bar = "#" * int(c.data["resample_rate"] * 20)
        print(f"{c.time:5.1f}  {cmin:5.2f}  {c.data['resample_rate']:5.2f} {bar:<20} {d:6.3f}")

print("\nevents:")
for r in log:
    if r.kind in ("llm_action", "correction_start", "correction_end", "semantic_correction"):
        print(f"  {r.time:6.2f}  {r.kind:20s} {r.data}")

out = here / "correction_series"
log_path = here / "correction_run.jsonl"
log.write(log_path)
cli_main(["plot", "--log", str(log_path), "--out", str(out)])
print(f"\nseries files in {out}")
