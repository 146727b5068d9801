"""List every minimum execution plan of a pattern with its scores."""

import argparse

from subenum.cli import load_pattern
from subenum.planner import enumerate_min_plans, exact_score, format_plan, select_plan


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("pattern", help="standard pattern name or pattern file")
    ap.add_argument("--rho", type=float, default=1.0)
    ap.add_argument("--top", type=int, default=10, help="plans to print, best first")
    args = ap.parse_args()

    p = load_pattern(args.pattern)
    plans = enumerate_min_plans(p, args.rho)
    chosen = select_plan(p, args.rho)
    print(f"{len(plans)} minimum plans with {len(chosen.units)} units")
    ranked = sorted(plans, key=lambda pl: -exact_score(pl))
    for pl in ranked[: args.top]:
        units = " | ".join(f"{d.piv}:{','.join(map(str, d.leaves))}" for d in pl.units)
        print(f"  score {float(exact_score(pl)):.6f} ({exact_score(pl)})  {units}")
    print("\nselected:")
    print(format_plan(chosen, p))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
