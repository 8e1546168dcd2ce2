"""Growth speed on the 64-torus for both lattices, plus the symmetric-rate control.

    python3 scripts/run_speed.py --out results/speed.json
"""
import argparse
import json
from pathlib import Path

from dimergrowth import harness as H


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--t", type=float, default=200.0)
    ap.add_argument("--replicas", type=int, default=32)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/speed.json")
    a = ap.parse_args()

    runs = {
        "hex": dict(kind="hex", rho=(1 / 3, 2 / 3)),
        "z2": dict(kind="z2", rho=(0.0, 0.0)),
        "hex_symmetric": dict(kind="hex", rho=(1 / 3, 2 / 3), q=1.0),
    }
    out = {}
    for seed, (name, kw) in enumerate(runs.items(), start=1):
        plan = H.ExperimentPlan(L=a.L, t_max=a.t, replicas=a.replicas, seed=seed, workers=a.workers, **kw)
        rep = H.estimate_speed(plan)
        out[name] = rep.to_dict()
        print(f"{name:14s} {rep.estimate:.5f} +- {rep.stderr:.5f}   prediction {rep.prediction:.5f}")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    Path(a.out).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
