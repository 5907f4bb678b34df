"""Joystick conditioning and the assistive fallback.

A scripted operator grabs the joystick mid-run (pushing across the active
route), releases it, and later clears the goal entirely. Watch the component
weights: they shift while the joystick window is live, revert exactly once
it empties, and collapse to a single joystick-ray plan when no goal is left.

The same event stream can be driven live from the browser console through
the gateway (navmix-run --scenario ... --serve 8765).

Run:  python3 demos/04_operator_intervention.py
"""

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from navmix.simulator import load_scenario, run

HERE = Path(__file__).resolve().parent
OUT = HERE / "out"
OUT.mkdir(exist_ok=True)

doc = json.loads((HERE.parent / "scenarios" / "intervention.json").read_text())
sc = load_scenario(doc)
log = run(sc)

times, series = [], {0: [], 1: [], 2: []}
assist_from = None
for r in log.records:
    times.append(r["time"])
    w = {c["id"]: c["w"] for c in r["components"]}
    for k in series:
        series[k].append(w.get(k, float("nan")))
    if assist_from is None and r["evidence"]["assistive"]:
        assist_from = r["time"]

events = sorted({e["t"] for e in doc["interventions"] if e["kind"] == "joystick"})
print(f"joystick samples at t = {events}")
print(f"goal cleared at t = 8.0; assistive mode from t = {assist_from}")
print("weights revert to the goals-only mixture once the joystick window empties.")

fig, ax = plt.subplots(figsize=(9, 4.5))
for k, label in [(0, "shortest route"), (1, "bottom detour"), (2, "top detour")]:
    ax.plot(times, series[k], lw=2, label=label)
for t in events:
    ax.axvline(t, color="k", alpha=0.15)
ax.axvline(8.0, color="r", ls="--", alpha=0.6, label="goal cleared")
if assist_from is not None:
    ax.axvspan(assist_from, times[-1], color="orange", alpha=0.15, label="assistive")
ax.set_xlabel("time [s]")
ax.set_ylabel("component weight")
ax.set_ylim(-0.05, 1.05)
ax.legend(loc="center left", fontsize=9)
ax.set_title("operator joystick reshapes the plan distribution, then reverts")
fig.savefig(OUT / "04_operator_intervention.png", dpi=120, bbox_inches="tight")
print(f"figure saved to {OUT / '04_operator_intervention.png'}")
