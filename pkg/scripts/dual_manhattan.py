"""How the chosen frame flips as the split between two frames moves.

Scenes hold two wall families at 0 and 45 deg; the share of the first family
runs from 0.3 to 0.7 and the script reports how often each frame wins.

    python scripts/dual_manhattan.py --trials 20
"""
import argparse

import numpy as np

from mwalign import synthetic
from mwalign.evaluation import EvalConfig, run_evaluation
from mwalign.geometry import FrameConfig
from mwalign.horizontal import list_manhattan_frames


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--splits", type=float, nargs="+", default=[0.3, 0.4, 0.45, 0.5, 0.55, 0.6, 0.7])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print("split,first_frame_wins,second_frame_wins,other,frames_listed")
    for split in args.splits:
        s = synthetic.dual_manhattan_cloud(40_000, split=split, rng=args.seed, noise_deg=1.0)
        rep = run_evaluation(s, EvalConfig(trials=args.trials, seed=args.seed))
        # delta_h is 0 on the first frame and 45 on the second
        dh = np.array([r.delta_h for r in rep.rows if not r.failed])
        first, second = int(np.sum(dh <= 1.0)), int(np.sum(dh >= 44.0))
        listed = " ".join(f"{f.gamma:.1f}" for f in list_manhattan_frames(s, FrameConfig(), fraction=0.5))
        print(f"{split:g},{first},{second},{len(rep.rows) - first - second},{listed}")


if __name__ == "__main__":
    main()
