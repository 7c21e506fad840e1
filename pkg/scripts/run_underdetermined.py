"""More sources than antennas: per-trial success and per-target RMSE.

Runs the aligned 11-target and misaligned 9-target scenarios.
"""
import argparse
from pathlib import Path

import numpy as np

from fasdoa.harness import default_estimator, load_config, run_trial

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int)
    parser.add_argument("--tol", type=float, default=1.0, help="success threshold in degrees")
    args = parser.parse_args()

    for name in ("underdetermined_aligned", "underdetermined_misaligned"):
        config = load_config(CONFIGS / f"{name}.toml")
        if args.trials:
            config.trials = args.trials
        config.validate()
        value = config.sweep.resolved_values()[0]
        truth = np.asarray(config.scenario.resolved_los())
        errors, miscounts = [], 0
        for t in range(config.trials):
            k_hat, err = run_trial((config, value, t, default_estimator))
            if err is None:
                miscounts += 1
            else:
                errors.append(err)
        errors = np.array(errors)
        success = np.mean(np.max(np.abs(errors), axis=1) <= args.tol) * len(errors) / config.trials
        print(f"\n{name}: {len(truth)} targets, {config.trials} trials, "
              f"count wrong in {miscounts}, all within {args.tol:g} deg in {success:.0%}")
        print(f"{'target':>8} {'rmse':>8} {'bias':>8}")
        for a, col in zip(truth, errors.T):
            print(f"{a:>8.2f} {np.sqrt(np.mean(col ** 2)):>8.3f} {np.mean(col):>8.3f}")


if __name__ == "__main__":
    main()
