from .gradcheck import check_gradients, numeric_grad, relative_error
from .optim import Adam, AdamState, adam_step, clip_grad_norm
from .tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    div,
    exp,
    gelu,
    layer_norm,
    linear,
    matmul,
    mul,
    neg,
    relu,
    reshape,
    scale,
    softmax_rows,
    square,
    sub,
    swapaxes,
    take,
    tanh,
    tmean,
    transpose,
    tsum,
)
