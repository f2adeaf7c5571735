"""Small reverse-mode automatic differentiation engine over numpy arrays."""

from .checkpoint import CheckpointError, load_arrays, save_arrays
from .gradcheck import check_gradients, numerical_grad, relative_error
from .ops import (
    BatchNormState,
    add,
    avg_pool2,
    batch_norm2d,
    concat_batch,
    concat_channels,
    conv2d,
    conv_output_size,
    dense,
    flatten,
    leaky_relu,
    log,
    max_pool2,
    mean,
    mul,
    relu,
    reshape,
    sigmoid,
    slice_batch,
    transpose,
    transposed_conv2d,
)
from .ops import (
    sum as sum_,
)
from .optim import OptimizerState, optimizer_step
from .tensor import Param, Tensor, backward, grad_enabled, no_grad
