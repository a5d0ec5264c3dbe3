"""Fresh-draw versus frozen-draw entanglement weights, same toy problem.

The only difference between the two runs is whether the client redraws its
combination weights every round or keeps the first draw forever. The frozen
variant gives the server a fixed set of mixtures to fit, and its final
accuracy lands well below the resampled one.
"""

import argparse
import sys

from fedre import presets, runner


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=60)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args(argv)

    means = {}
    for mode in ("rs", "fs"):
        cfg = presets.toy_comparison_config(
            rounds=args.rounds, num_seeds=args.seeds, resample=mode
        )
        summary = runner.run_experiment(cfg)
        means[mode] = 100 * summary.mean_acc
        print(
            f"{mode}  mean final acc {means[mode]:6.2f}%"
            f" +- {100 * summary.std_acc:5.2f} over {args.seeds} seeds"
        )
    print(f"gap (rs - fs): {means['rs'] - means['fs']:.2f} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
