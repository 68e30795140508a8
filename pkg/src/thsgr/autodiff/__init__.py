from .tensor import Tensor, Tape, Node, active_tape, as_tensor, tagged
from . import ops
from .ops import (
    add,
    sub,
    mul,
    hadamard,
    div,
    matmul,
    sum,
    mean,
    reshape,
    transpose,
    broadcast_to,
    concat,
    getitem,
    leaky_relu,
    sigmoid,
    softmax,
    log_softmax,
    gelu_erf,
    batch_norm,
    conv_nd,
    conv1d,
    conv2d,
    conv3d,
)
from .gradcheck import grad_check, GradCheckReport
