"""Stochastic-computing binarized neural networks.

Binary layers compute popcount(XNOR(W, a)) against folded thresholds; the
first layer can run conventionally on real inputs or on T Bernoulli
presentations accumulated at a configurable layer. Includes the full BNN
training procedure (straight-through estimator, Adam with clipping,
batch-norm folding) and a calibrated cycle/energy/area model of the
32x32-cell in-memory accelerator.
"""

from .bitcore import BitMatrix, BitVector, binary_gemv, pack_signs, xnor_popcount
from .dataio import Dataset, load_idx, load_model, read_model, save_idx, save_model, write_model
from .encoder import (
    BitSource,
    Lfsr8State,
    RngKind,
    StochasticConfig,
    lfsr8_next,
    lfsr8_step,
    make_bit_source,
    sample_binarized,
    sample_presentations,
)
from .errors import SbnnError
from .model import (
    BinaryLayer,
    BnnModel,
    FirstLayerReal,
    first_layer_forward_real,
    fold_thresholds,
    infer_conventional,
    infer_stochastic,
    layer_forward_binary,
    predict_conventional_batch,
    predict_stochastic_batch,
)
from .training import (
    InputMode,
    TrainConfig,
    TrainableLayer,
    adam_clip_update,
    batchnorm_backward,
    batchnorm_forward,
    binarize_weights,
    export_model,
    fit,
    init_train_state,
    softmax_xent_backward,
    ste_mask,
    train,
)
from .archsim import (
    CellGridConfig,
    CostModel,
    SimReport,
    compare_nonbinarized,
    default_cost_model,
    estimate_area,
    estimate_energy,
    map_model,
    simulate_inference,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
