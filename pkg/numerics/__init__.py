"""
Transflex - Numerics Module
===========================
Reverse-mode tape, parameter store, AdaDelta and the finite-difference checker.
"""

from .tape import Node, Tape, masked_softmax, masked_log_softmax
from .params import ParamStore, identity_init, uniform_init, encode_tensors, decode_tensors, PRECISIONS
from .adadelta import AdaDeltaState, adadelta_step
from .gradcheck import GradCheckReport, ParamCheck, grad_check, analytic_gradients, relative_error

__all__ = [
    "Node",
    "Tape",
    "masked_softmax",
    "masked_log_softmax",
    "ParamStore",
    "identity_init",
    "uniform_init",
    "encode_tensors",
    "decode_tensors",
    "PRECISIONS",
    "AdaDeltaState",
    "adadelta_step",
    "GradCheckReport",
    "ParamCheck",
    "grad_check",
    "analytic_gradients",
    "relative_error",
]
