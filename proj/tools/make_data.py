"""Regenerates the small bundled networks and the demo scenario in data/."""
import json
import math
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "data"


def link(lid, frm, to, length, diameter, a_open, k_min=1.0, grid=40, sensors=(), model="fom"):
    return {
        "id": lid, "from": frm, "to": to,
        "length_m": length, "diameter_m": diameter,
        "roughness_m": 1.5e-6, "k_min": k_min,
        "valve": {"c_d": 0.6, "a_open_m2": a_open, "a_closed_m2": 1e-9, "opening": 1.0},
        "thermal": {"lambda_per_s": 5e-4, "D_m2_s": 5e-3, "grid_points": grid,
                    "sensors_m": list(sensors), "model": model, "order": 7,
                    "reduction": "moment", "reference_velocity_m_s": 0.1},
    }


def network(nodes, links, demands=(), feed="S"):
    return {
        "format": "thermonet-network", "version": 1,
        "fluid": {"density_kg_m3": 998.2, "kinematic_viscosity_m2_s": 1e-6},
        "feed": {"node": feed, "mode": "head"},
        "initial_temperature_C": 20.0,
        "nodes": nodes, "links": links, "demands": list(demands),
    }


def write(name, obj):
    (DATA / name).write_text(json.dumps(obj, indent=2) + "\n")


write("single_pipe.json", network(
    [{"id": "S", "head_bar": 0.3}, {"id": "R", "head_bar": 0.0}],
    [link("p", "S", "R", 20.0, 0.02, 3e-4, k_min=2.0, grid=80, sensors=[10.0])]))

write("parallel_pair.json", network(
    [{"id": "S", "head_bar": 0.3}, {"id": "J1"}, {"id": "J2"}, {"id": "R", "head_bar": 0.0}],
    [link("feed", "S", "J1", 5.0, 0.032, 8e-4, grid=20),
     link("a", "J1", "J2", 10.0, 0.02, 3e-4, k_min=2.0, sensors=[5.0]),
     link("b", "J1", "J2", 10.0, 0.02, 3e-4, k_min=2.0, sensors=[5.0]),
     link("ret", "J2", "R", 5.0, 0.032, 8e-4, grid=20)]))

write("branch_demand.json", network(
    [{"id": "S", "head_bar": 0.25}, {"id": "A"}, {"id": "B"}, {"id": "R", "head_bar": 0.0}],
    [link("sa", "S", "A", 8.0, 0.025, 5e-4, grid=40),
     link("ab", "A", "B", 12.0, 0.02, 2e-4, k_min=2.0, sensors=[6.0]),
     link("ar", "A", "R", 10.0, 0.02, 1e-4, k_min=2.0, sensors=[5.0]),
     link("br", "B", "R", 6.0, 0.02, 5e-5, grid=30)],
    demands=[{"node": "B", "c_de": 0.6,
              "valve": {"a_open_m2": 2e-5, "a_closed_m2": 1e-9, "opening": 1.0}}]))

# Two-hour demo for the three-path network: valves closed for the first 30 min,
# then modulated; feed temperature ramps up; one demand pulse per branch.
rows = []
header = ["time_s", "h_up_bar", "T_up_C", "T_amb_C", "u_v:down1", "u_v:down2", "u_v:down3",
          "u_d:M1", "u_d:M2", "u_d:M3"]
for k in range(7201):
    t = float(k)
    h = t / 3600.0
    ramp = 0.5 - 0.5 * math.cos(math.pi * min(h / 0.5, 1.0))
    row = [t, 0.2 + 0.03 * math.sin(2 * math.pi * h / 1.5), 20.0 + 30.0 * ramp, 20.0]
    for i in range(3):
        row.append(0.0 if t < 1800 else 0.55 + 0.4 * math.sin(2 * math.pi * (h - 0.5) / (0.8 + 0.2 * i) + i))
    for i in range(3):
        start = 3600 + 900 * i
        row.append(0.8 if start <= t < start + 600 else 0.0)
    rows.append(row)
with open(DATA / "three_path_demo.csv", "w") as f:
    f.write(",".join(header) + "\n")
    for row in rows:
        f.write(",".join(repr(round(x, 9)) if isinstance(x, float) else str(x) for x in row) + "\n")
