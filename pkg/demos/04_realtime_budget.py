"""Does one 200-step trial fit the 2 s real-time budget of a 100 Hz loop?"""

from anisonet import pipeline as pl
from anisonet.config import RunConfig

for kind, cfg in pl.network_configs(RunConfig()).items():
    conn = pl.build(cfg)
    for readout in ("pooling", "excitatory"):
        sec = pl.bench_trial(conn, horizon=200, readout=readout, repeats=3)
        print(f"{kind:12s} {readout:10s} {sec:.3f} s per trial "
              f"({sec / 2.0:.1%} of the budget)")
