"""Map a network onto the cell grid and simulate one classification.

The simulator executes the placed datapath word by word (32-bit XNOR +
partial popcount per cell per cycle) and must agree bit-exactly with the
functional stochastic inference; it also reports cycles and the energy
breakdown per component.
"""

import numpy as np

from sbnn import StochasticConfig, infer_stochastic
from sbnn.archsim import layer_cells, map_model, simulate_inference
from sbnn.bitcore import BitVector
from sbnn.encoder import presentation_word_stack
from sbnn.training import InputMode, TrainConfig, export_model, fit, init_train_state
from sbnn.synth import make_benchmark

train_ds, test_ds = make_benchmark(2000, 200, seed=7)
cfg_train = TrainConfig(epochs=8, batch_size=100, seed=0, input_mode=InputMode.STOCHASTIC, t=3)
state, _ = fit(init_train_state([784, 64, 64, 10], seed=0), train_ds, cfg_train)
model = export_model(state, cfg_train)

placement = map_model(model)
print(f"layer sizes : {model.layer_sizes}")
print(f"cells/layer : {layer_cells(model.layer_sizes)} of 1024\n")

x = test_ds.images[0]
cfg = StochasticConfig(t=3, seed=41)
pres = [BitVector(x.size, w) for w in presentation_word_stack(x, cfg)]
report = simulate_inference(placement, pres)

print(report.to_text())
print(f"\ntrue label            : {test_ds.labels[0]}")
print(f"functional model class: {infer_stochastic(model, x, cfg)}")
print(f"bit-exact match       : {report.predicted_class == infer_stochastic(model, x, cfg)}")
