"""Dense float64 tensors with tape-based reverse-mode differentiation."""
from .autodiff import (Graph, Tensor, add, as_tensor, backward, broadcast_to, concat, cos,
                       current_graph, div, exp, gelu, graph_scope, index, layer_norm, log,
                       matmul, mean, mul, neg, no_grad, norm, power, reshape, sin, softmax,
                       sqrt, stack, sub, swapaxes, take, tanh, tsum)
from .layers import causal_mask, feed_forward, linear, multi_head_attention
from .optim import AdamW, adamw_step, clip_grad_norm

__all__ = [
    "AdamW", "Graph", "Tensor", "adamw_step", "add", "as_tensor", "backward", "broadcast_to",
    "causal_mask", "clip_grad_norm", "concat", "cos", "current_graph", "div", "exp",
    "feed_forward", "gelu", "graph_scope", "index", "layer_norm", "linear", "log", "matmul",
    "mean", "mul", "multi_head_attention", "neg", "no_grad", "norm", "power", "reshape", "sin",
    "softmax", "sqrt", "stack", "sub", "swapaxes", "take", "tanh", "tsum",
]
