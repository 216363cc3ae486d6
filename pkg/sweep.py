"""Calibration sweep harness (not part of the package)."""
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ncdkit import presets, synthdata, trainer, model as M


def run_one(job):
    seed, overrides, hyper_overrides = job
    rc = presets.make_preset('separable-10', seed=seed)
    for k, v in overrides.items():
        setattr(rc.train, k, v)
    for k, v in hyper_overrides.items():
        setattr(rc.hyper, k, v)
    ds = synthdata.generate(rc.generator, rc.seed)
    params = M.init_params(rc.generator.spec, rc.model,
                           int(np.random.default_rng([seed, 4051]).integers(2**31)))
    params, log, report = trainer.train(ds, params, rc.train, rc.hyper)
    return seed, report.acr, report.acc


def sweep(configs, seeds, workers=2):
    out = []
    for name, overrides, hyper_overrides in configs:
        jobs = [(s, overrides, hyper_overrides) for s in seeds]
        with ProcessPoolExecutor(workers) as ex:
            res = list(ex.map(run_one, jobs))
        accs = [r[2] for r in res]
        acrs = [r[1] for r in res]
        ok = sum(1 for a, c in zip(acrs, accs) if a >= 0.95 and c >= 0.90)
        print(f"{name}: pass {ok}/{len(seeds)}  acc={[round(a,2) for a in accs]} "
              f"acr_min={min(acrs):.3f}", flush=True)
        out.append((name, ok, accs))
    return out


if __name__ == "__main__":
    grid = []
    for lr in (1e-4, 2e-4, 5e-4):
        for steps in (20, 60):
            for mode in ("log", "prob"):
                grid.append((f"lr{lr}_st{steps}_{mode}",
                             {"learning_rate": lr, "steps_per_epoch": steps,
                              "sharpen_mode": mode}, {}))
    sweep(grid, seeds=[0, 1, 2, 3])
