"""Learn a MISO precoder with a users x antennas GNN and compare with WMMSE.

Run: python3 demos/miso_training.py   (about a minute)
"""

import numpy as np

from equinet import baselines, channels
from equinet.problems import ModelSpec, build_head, sum_rate
from equinet.training import TrainConfig, evaluate, train

K, N_t, P, sigma2 = 2, 4, 1.0, 0.1  # 10 dB
spec = ModelSpec("miso2d", K=K, N_t=N_t, hidden=[64, 64, 64], norm=True, P_tot=P, sigma2=sigma2)
model = build_head(spec, seed=0, dtype=np.float32)

train_set = {"H": channels.gen_rayleigh_iid(K, N_t, seed=1, n_samples=10_000)}
test_set = {"H": channels.gen_rayleigh_iid(K, N_t, seed=2, n_samples=1_000)}

result = train(model, train_set, TrainConfig(epochs=10, batch_size=200, lr=1e-3), val=test_set)
for epoch, rate in enumerate(result.val_history, 1):
    print("epoch %2d  validation sum-rate %.3f" % (epoch, rate))

gnn = evaluate(model, test_set).mean()
ref = baselines.wmmse(test_set["H"], P, sigma2)
print("GNN %.3f  WMMSE %.3f  ratio %.1f%%" % (gnn, ref.mean_rate, 100 * gnn / ref.mean_rate))

# the learned map is a precoder: check one sample by hand
W = model.predict({"H": test_set["H"][:1]})
print("power", np.sum(np.abs(W) ** 2), "rate", sum_rate(test_set["H"][:1], W, sigma2))
