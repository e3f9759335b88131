"""Read robot-arm trajectories out of the network activity.

The 72 pooling neurons' spike counts (sliding 10-step windows) are mapped
linearly onto seven 3D end-effector trajectories.  The representation task
tests on a trial that was also used for training; the generalisation task
holds the test trial out.  Pass ``--enet`` to add the elastic net on all
3600 excitatory neurons (slow: a few minutes).
"""

import sys

import numpy as np

from anisonet import pipeline as pl
from anisonet import readout as ro
from anisonet.config import RunConfig

run = RunConfig()
use_enet = "--enet" in sys.argv
trajs = pl.trajectory_matrix(run.trajectories, seed=run.trajectory_seed)
enet = ro.ElasticNetConfig(run.alpha, run.l1_ratio, max_iter=run.enet_max_iter)

for kind, cfg in pl.network_configs(run).items():
    _, ts = pl.experiment(cfg)
    for task in ("representation", "generalisation"):
        res = pl.evaluate_tasks(ts.features("pooling"), trajs, task, "ols")
        per_traj = res["nrmse"].mean(axis=(1, 2))
        print(f"{kind:12s} {task:15s} pooling OLS   NRMSE {per_traj.mean():.4f}  "
              + " ".join(f"{n}={e:.3f}" for n, e in zip(run.trajectories, per_traj)))
        if use_enet and task == "generalisation":
            res = pl.evaluate_tasks(ts.features("excitatory"), trajs, task, "elasticnet",
                                    run.enet_test_trials, enet)
            print(f"{kind:12s} {task:15s} full enet     NRMSE {res['nrmse'].mean():.4f}")

# a single prediction, smoothed, next to its target
_, ts = pl.experiment(pl.network_configs(run)["anisotropic"])
task = ro.TaskSpec.generalisation(0)
res = ro.run_task(ts.features("pooling"), trajs[0], task)
print(f"\n{run.trajectories[0]}, held-out trial 0, NRMSE {res.nrmse:.4f}")
for t in range(0, 200, 40):
    print(f"  t={t / 100:.1f}s target {np.round(trajs[0][t], 3)} "
          f"prediction {np.round(res.smoothed[t], 3)}")
