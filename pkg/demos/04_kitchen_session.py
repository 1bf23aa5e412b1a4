"""A multi-step kitchen session driven by the scripted mock model.

The robot picks the pot, places it on the stove, and moves over the beans;
a brief scripted nudge mid-run shows the confidence dip without opening a
correction episode.  The printout is the interaction transcript as the
model saw it.
"""

from pathlib import Path

from nudgesim.scenario import scenario_from_file
from nudgesim.sim import Simulation

scenario = scenario_from_file(Path(__file__).resolve().parent.parent / "scenarios" / "cooking.json")
sim = Simulation(scenario)
log = sim.run()

print("event timeline:")
for r in log:
    if r.kind in ("llm_action", "pick", "place", "correction_start", "correction_end"):
        print(f"  {r.time:6.2f}  {r.kind:12s} {r.data}")

print("\ntranscript:")
for entry in sim.transcript.entries:
    print(f"--- step {entry.step} ---")
    print(entry.user_prompt)
    proposed = (
        f"{entry.proposed.verb} {entry.proposed.object_id}" if entry.proposed else "(hold)"
    )
    print(f">> proposed: {proposed}   result: {entry.execution_result}")
    if entry.correction_text:
        print(f">> correction: {entry.correction_text}")
    print()
