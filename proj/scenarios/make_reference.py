#!/usr/bin/env python3
"""Writes reference.json: two data-center hubs, eight branch spokes, three transport networks."""
import json
import sys

HUBS = ["dc1", "dc2"]
SPOKES = [f"br{i}" for i in range(1, 9)]
NETWORKS = [  # id, kind, line rate at the branch, one-way propagation
    ("mpls1", "mpls", 5.0, 0.010),
    ("mpls2", "mpls", 10.0, 0.020),
    ("inet", "internet", 25.0, 0.030),
]
BASE_MBPS = {"critical": 0.5, "voip": 1.0, "office": 6.0, "bulk": 4.0}
DURATION = 1200


def main(path):
    links, groups, traffic, cross = [], [], [], []
    for h_i, hub in enumerate(HUBS):
        for s_i, spoke in enumerate(SPOKES):
            for net, _, cap, prop in NETWORKS:
                links.append({"id": f"{hub}-{spoke}-{net}", "src": hub, "dst": spoke,
                              "network": net, "capacity_mbps": cap, "prop_delay_s": prop})
            for c_i, (cls, base) in enumerate(BASE_MBPS.items()):
                gid = f"{hub}-{spoke}-{cls}"
                groups.append({"id": gid, "src": hub, "dst": spoke, "class": cls, "demand_mbps": base})
                traffic.append({"group": gid, "base_mbps": base, "diurnal_amplitude": 0.5,
                                "period_s": DURATION, "phase_s": 150.0 * ((s_i + 3 * h_i + c_i) % 8),
                                "noise_std": 0.1})
    for s_i, spoke in enumerate(SPOKES):
        if s_i % 2 == 0:
            cross.append({"node": spoke, "network": "inet", "shape": "sinusoid",
                          "base_mbps": 7.0, "amplitude_mbps": 5.0, "period_s": 600.0,
                          "phase_s": 75.0 * s_i, "noise_std": 0.05})
        else:
            cross.append({"node": spoke, "network": "inet", "shape": "piecewise",
                          "steps": [{"start_s": 0, "rate_mbps": 2.0}, {"start_s": 300, "rate_mbps": 12.0},
                                    {"start_s": 600, "rate_mbps": 4.0}, {"start_s": 900, "rate_mbps": 10.0}],
                          "noise_std": 0.05})
    doc = {
        "name": "reference",
        "seed": 2024,
        "networks": [{"id": n, "kind": k} for n, k, _, _ in NETWORKS],
        "nodes": [{"id": h, "role": "hub"} for h in HUBS] + [{"id": s, "role": "spoke"} for s in SPOKES],
        "ports": [{"node": s, "network": n, "capacity_mbps": cap} for s in SPOKES for n, _, cap, _ in NETWORKS],
        "overlay_links": links,
        "flow_groups": groups,
        "traffic_profiles": traffic,
        "cross_traffic": cross,
        "loops": {"duration_s": DURATION},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "reference.json")
