"""Current variance against log t, and the V-field variance ratio table.

    python3 scripts/run_variance.py --replicas 200 --samples 500
"""
import argparse
from pathlib import Path

from dimergrowth import harness as H
from dimergrowth.lattice import Slope


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--L", type=int, default=64)
    ap.add_argument("--replicas", type=int, default=200)
    ap.add_argument("--times", default="10,20,40,80,160")
    ap.add_argument("--sizes", default="8,16,32")
    ap.add_argument("--samples", type=int, default=500)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    a = ap.parse_args()
    outdir = Path(a.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    times = tuple(float(t) for t in a.times.split(","))
    plan = H.ExperimentPlan(kind="hex", L=a.L, t_max=max(times), replicas=a.replicas,
                            schedule=times, seed=4, workers=a.workers)
    rep = H.variance_growth(plan, enforce_cap=False)
    rep.to_json(outdir / "variance_growth.json")
    print("t       Var J     se      Var/log t")
    for row in rep.details["table"]:
        print(f"{row['t']:<7g} {row['var']:<9.4f} {row['se']:<7.4f} {row['var_over_log_t']:.4f}")
    print(f"power-law exponent {rep.fit['power_exponent']:.3f} +- {rep.fit['power_exponent_se']:.3f}")

    sizes = [int(s) for s in a.sizes.split(",")]
    vf = H.v_field_variance(Slope(1 / 3, 2 / 3), sizes, a.samples, seed=6)
    vf.to_json(outdir / "v_field_variance.json")
    print("L    Var(sum V)/(L^2 log L)")
    for row in vf.details["table"]:
        print(f"{row['L']:<4d} {row['ratio']:.4f} +- {row['ratio_se']:.4f}")


if __name__ == "__main__":
    main()
