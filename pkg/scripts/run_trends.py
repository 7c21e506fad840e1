"""RMSE against SNR and snapshot count for G = 0 and G = 1, with the bound.

Writes results/trend_<kind>_<axis>_G<g>.{csv,json,dat} and prints a table.
"""
import argparse
from pathlib import Path

from fasdoa.harness import emit_results, load_config, run_campaign

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, help="override the per-point trial count")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=Path, default=Path("results"))
    args = parser.parse_args()

    for kind in ("aligned", "misaligned"):
        for axis in ("snr", "snapshots"):
            for G in (0, 1):
                config = load_config(CONFIGS / f"trend_{kind}_{axis}.toml")
                config.design.G = G
                if args.trials:
                    config.trials = args.trials
                result = run_campaign(config, workers=args.workers)
                emit_results(result, args.out / f"trend_{kind}_{axis}_G{G}", ["csv", "json", "dat"])
                print(f"\n{kind} {axis} G={G} ({config.trials} trials)")
                print(f"{'value':>8} {'rmse':>9} {'sqrt crb':>9} {'detect':>7}")
                for p in result.points:
                    print(f"{p.sweep_value:>8g} {p.rmse_deg:>9.4f} {p.crb_sqrt_deg:>9.4f} "
                          f"{p.detect_rate:>7.3f}")


if __name__ == "__main__":
    main()
