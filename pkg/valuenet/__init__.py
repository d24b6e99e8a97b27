from valuenet.relu_net import (
    FitDataset,
    FitHyper,
    ReLUNet,
    activations,
    fit,
    forward,
    forward_batch,
    from_module,
    init_net,
    loss_and_gradients,
    to_module,
)
from valuenet.bounds import LayerBounds, layer_bigM, neuron_bigM, propagate_bounds
from valuenet.serialization import dumps, load_net, loads, save_net
