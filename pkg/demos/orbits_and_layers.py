"""Orbit bases of equivariant layers and what they cost.

Run: python3 demos/orbits_and_layers.py
"""

import numpy as np

from equinet.equivariance import (SetSignature, SetSpec, adjacency_mask, commutation_error,
                                  enumerate_orbits, materialize_operator)
from equinet.toolkit.complexity import ComplexityQuery, flops, weight_count

rng = np.random.default_rng(0)

# users x antennas x RF chains, all permuted independently
sig = SetSignature.independent(users=2, antennas=3, rf=2)
space = ["users", "antennas", "rf"]
full = enumerate_orbits(sig, space, space)
kept = adjacency_mask(full)
print("3D layer: %d orbits, %d kept after the neighbour mask" % (full.n_orbits, kept.n_retained))

# one weight per kept orbit gives an operator that commutes with every permutation
P = materialize_operator(kept, rng.standard_normal(kept.n_retained))
print("operator shape", P.shape, "commutation error", commutation_error(P, sig, space, space, rng=rng))

# power control: transmitters and receivers share one permutation
K = 4
joint = SetSignature((SetSpec("rx", K), SetSpec("tx", K)), ((0, 1),))
b = enumerate_orbits(joint, ["rx", "tx"], ["rx", "tx"])
print("joint K=%d: %d orbits, %d kept" % (K, b.n_orbits, adjacency_mask(b).n_retained))

# antennas split into two interchangeable panels of 3
nested = SetSignature((SetSpec("users", 3), SetSpec("antennas", 6, (3, 3))))
b = enumerate_orbits(nested, ["users", "antennas"], ["users", "antennas"])
print("nested: %d orbits, %d kept" % (b.n_orbits, adjacency_mask(b).n_retained))

# per-layer FLOPs and weights for C_l = C_{l+1} = 64 at K=2, N_t=8, N_s=4
for kind in ("1d", "2d", "3d"):
    q = ComplexityQuery(kind, 64, 64, K=2, N_t=8, N_s=4)
    print("%s layer: %8d FLOPs  %6d weights" % (kind, flops(q), weight_count(q)))
