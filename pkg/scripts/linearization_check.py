"""Median ||K - K_lin|| and cross gap versus d at n = d (iid Gaussian design, Sigma_p = I)."""
import argparse
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from iwkrr import kernelcore as kc
from iwkrr import synthdata as sd


@dataclass
class GapConfig:
    dims: Tuple[int, ...] = (100, 200, 400, 800)
    seeds: int = 5
    master_seed: int = 404
    kernels: Tuple[str, ...] = field(default=("polynomial", "gaussian"))


def median_gaps(spec, d, cfg):
    sigma_p = np.ones(d)
    out = []
    for s in range(cfg.seeds):
        rng = np.random.default_rng(sd.mix64(cfg.master_seed, d * 10 + s))
        sigma_q = sd.perturb_covariance(sigma_p, rng)
        X = sd.sample_iid_design(rng, d, sigma_p)
        Xt = sd.sample_iid_design(rng, d, sigma_q)
        out.append(kc.linearization_gap(spec, sigma_p, sigma_q, X, Xt))
    return np.median(np.array(out), axis=0)


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--dims", type=int, nargs="+", default=list(GapConfig.dims))
    p.add_argument("--seeds", type=int, default=GapConfig.seeds)
    a = p.parse_args()
    cfg = GapConfig(dims=tuple(a.dims), seeds=a.seeds)
    specs = {"polynomial": kc.KernelSpec.polynomial(5), "gaussian": kc.KernelSpec.gaussian()}
    print(f"{'kernel':>10} {'d':>5} {'gram gap':>10} {'cross gap':>10}")
    for name in cfg.kernels:
        for d in cfg.dims:
            g, c = median_gaps(specs[name], d, cfg)
            print(f"{name:>10} {d:5d} {g:10.4g} {c:10.4g}")


if __name__ == "__main__":
    main()
