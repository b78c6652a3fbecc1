"""Where should the T presentations be accumulated?

Pre-activations can be summed across presentations at the first layer, at
a hidden layer, or at the output (full stochastic computing through the
whole depth). On an adapted-trained network the strategies give equivalent
accuracy; first-layer accumulation is preferred in hardware because the
deeper layers then run only once.
"""

import numpy as np

from sbnn import (
    InputMode,
    StochasticConfig,
    TrainConfig,
    export_model,
    fit,
    init_train_state,
    predict_stochastic_batch,
)
from sbnn.synth import make_benchmark

train_ds, test_ds = make_benchmark(4000, 1000, seed=7)

cfg = TrainConfig(epochs=12, batch_size=100, seed=0, input_mode=InputMode.STOCHASTIC, t=3)
state, _ = fit(init_train_state([784, 64, 64, 10], seed=0), train_ds, cfg, test=test_ds)
model = export_model(state, cfg)
names = {1: "first layer", 2: "hidden layer", model.depth: "output layer"}

print(f"{'T':>4}  " + "  ".join(f"{n:>14}" for n in names.values()))
for t in (1, 3, 8, 32):
    row = []
    for k in names:
        c = StochasticConfig(t=t, seed=9, accumulation_layer=k)
        row.append(float(np.mean(predict_stochastic_batch(model, test_ds.images, c) == test_ds.labels)))
    print(f"{t:>4}  " + "  ".join(f"{a:>14.3f}" for a in row))
