"""Hybrid precoding with the users x antennas x RF-chains GNN.

The virtual feature pins an ordering of the RF chains; permuting it permutes
the chains of the output. Training sits near 70% of the baseline for a while
before climbing. Run: python3 demos/hybrid_precoding.py (about 4 minutes)
"""

import numpy as np

from equinet import baselines, channels
from equinet.problems import ModelSpec, build_head
from equinet.toolkit.experiments import audit
from equinet.training import TrainConfig, evaluate, train

K, N_t, N_s, P, sigma2 = 2, 8, 4, 1.0, 0.1
spec = ModelSpec("hybrid3d", K=K, N_t=N_t, N_s=N_s, hidden=[30] * 5, norm=True, P_tot=P, sigma2=sigma2)
model = build_head(spec, seed=0, dtype=np.float32)
print("trainable weights:", model.n_weights)

train_set = {"H": channels.gen_sv_narrowband(K, N_t, seed=100, n_samples=5_000)}
test_set = {"H": channels.gen_sv_narrowband(K, N_t, seed=2, n_samples=500)}
train(model, train_set, TrainConfig(epochs=60, batch_size=100, lr=1e-3), val=test_set)

gnn = evaluate(model, test_set).mean()
pem = baselines.pem_hybrid(test_set["H"], P, sigma2, N_s).mean_rate
print("GNN %.3f  PEM %.3f  ratio %.1f%%" % (gnn, pem, 100 * gnn / pem))

sol = model.predict({"H": test_set["H"][:1]})
print("max | |W_RF| - 1 |:", np.abs(np.abs(sol.W_RF) - 1).max())
print("power / P_tot:", sol.power() / P)

# equivariance over users, antennas and (through the virtual feature) RF chains
print(audit(model, trials=20))
