"""Power control with transmitters and receivers permuted jointly.

Run: python3 demos/power_control.py   (a few minutes)
"""

import numpy as np

from equinet import baselines, channels
from equinet.problems import ModelSpec, build_head, pc_rate
from equinet.training import TrainConfig, evaluate, train

K, P_M, sigma2 = 4, 1.0, 0.1
spec = ModelSpec("power", K=K, hidden=[32, 32, 32], norm=True, P_tot=P_M, sigma2=sigma2)
model = build_head(spec, seed=0, dtype=np.float32)

train_set = {"G": channels.gen_pc_gains(K, seed=1, n_samples=20_000)}
test_set = {"G": channels.gen_pc_gains(K, seed=2, n_samples=1_000)}
train(model, train_set, TrainConfig(epochs=10, batch_size=200, lr=1e-3), val=test_set)

G = test_set["G"]
gnn = evaluate(model, test_set).mean()
ref = baselines.wmmse_power(G, P_M, sigma2).mean_rate
full = pc_rate(G, np.full(G.shape[:-1], P_M), sigma2).mean()
print("GNN %.3f  WMMSE %.3f  full power %.3f" % (gnn, ref, full))

# a tiny case where the grid optimum can be checked by eye
G2 = np.ones((2, 2))
grid = np.linspace(0, 1, 1001)
p1, p2 = np.meshgrid(grid, grid, indexing="ij")
best = pc_rate(G2, np.stack([p1, p2], axis=-1), 1.0).max()
print("K=2 grid optimum %.4f, WMMSE %.4f" % (best, baselines.wmmse_power(G2, 1.0, 1.0).rates))
