"""Where does the variance peak move as the ridge constant C shrinks? Desk sizes, one decay."""
import argparse
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from iwkrr import kernelcore as kc
from iwkrr import synthdata as sd
from iwkrr.labcli import preset_config, run_sweep, series_stats


@dataclass
class ScanConfig:
    decay: float = 1.5
    fractions: Tuple[float, ...] = (1e-1, 1e-2, 1e-3)  # C = fraction * gamma
    seeds: int = 3


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--decay", type=float, default=ScanConfig.decay)
    p.add_argument("--seeds", type=int, default=ScanConfig.seeds)
    a = p.parse_args()
    sc = ScanConfig(decay=a.decay, seeds=a.seeds)
    base = preset_config("desk")
    sigma_p = sd.make_covariance(base.d, sc.decay, normalize=base.normalize_covariance)
    gamma = kc.linearize_params(base.kernel, sigma_p).gamma
    for frac in sc.fractions:
        cfg = preset_config("desk", {"decay_list": [sc.decay], "seeds": sc.seeds, "lambda.C": frac * gamma})
        ns, mean, _ = series_stats(run_sweep(cfg).records, "variance")[sc.decay]
        print(f"C={frac:g}*gamma: peak n={int(ns[np.argmax(mean)])}  V=" + " ".join(f"{v:.3f}" for v in mean))


if __name__ == "__main__":
    main()
