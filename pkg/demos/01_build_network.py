"""Build the anisotropic network and look at what makes it anisotropic.

Every excitatory neuron gets a preferred direction from a smooth Perlin
landscape, and its excitatory targets are drawn around a point one grid
unit away in that direction.  Neighbouring neurons point the same way, so
activity can travel across the sheet as a coherent sequence.
"""

import numpy as np

from anisonet.config import NetworkConfig
from anisonet.connectome import DIRECTIONS, build_anisotropic, build_random_control

cfg = NetworkConfig()
conn = build_anisotropic(cfg)
print(f"{conn.n_exc} excitatory, {conn.n_inh} inhibitory, {conn.n_pool} pooling neurons")
print(f"{len(conn.source)} synapses, input patch {conn.input_patch.reshape(5, 5)[0]}...")

# every recurrent neuron has exactly the same out-degree
rec = conn.target < conn.n_exc + conn.n_inh
src = conn.source[rec]
to_e = np.bincount(src[conn.target[rec] < conn.n_exc], minlength=conn.n_exc + conn.n_inh)
print("excitatory targets per neuron:", np.unique(to_e))

# direction bins: neighbours mostly agree
bins = conn.landscape.bins.reshape(60, 60)
same = (bins == np.roll(bins, 1, axis=1)).mean()
print(f"fraction of horizontal neighbours sharing a direction: {same:.2f} (chance 0.125)")
print("direction histogram:", np.bincount(bins.ravel(), minlength=8))

# the targets of one neuron sit off-centre, along its direction
i = 1830
ee = (conn.source == i) & (conn.target < conn.n_exc)
r0, c0 = divmod(i, 60)
tr, tc = np.divmod(conn.target[ee], 60)
dr = (tr - r0 + 30) % 60 - 30
dc = (tc - c0 + 30) % 60 - 30
print(f"neuron {i}: direction {DIRECTIONS[bins.ravel()[i]]}, "
      f"mean target offset ({dr.mean():+.2f}, {dc.mean():+.2f})")

rand = build_random_control(cfg)
print(f"random control: {len(rand.source)} synapses, same degrees, no spatial structure")
