"""
Transflex - AdaDelta
====================
Per-element adaptive updates from running averages of squared gradients and
squared updates; no global learning rate.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from utils.errors import ShapeError

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.95
DEFAULT_EPS = 1e-6


@dataclass
class AdaDeltaState:
    """Running averages E[g^2] and E[dx^2], zero-initialized."""
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS
    sq_grad: Dict[str, np.ndarray] = field(default_factory=dict)
    sq_update: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS) -> "AdaDeltaState":
        return cls(
            rho=rho,
            eps=eps,
            sq_grad={name: np.zeros_like(p) for name, p in params.items()},
            sq_update={name: np.zeros_like(p) for name, p in params.items()},
        )

    def tensors(self) -> Dict[str, np.ndarray]:
        """Flat view for checkpointing."""
        out = {f"opt.sq_grad.{name}": v for name, v in self.sq_grad.items()}
        out.update({f"opt.sq_update.{name}": v for name, v in self.sq_update.items()})
        return out

    def load_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        for name in self.sq_grad:
            self.sq_grad[name][...] = tensors[f"opt.sq_grad.{name}"]
            self.sq_update[name][...] = tensors[f"opt.sq_update.{name}"]


def adadelta_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], state: AdaDeltaState) -> None:
    """
    Apply one update in place:

        E[g^2]  <- rho E[g^2] + (1 - rho) g^2
        dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
        x       <- x + dx
    """
    rho, eps = state.rho, state.eps
    for name, x in params.items():
        if grads[name].shape != x.shape:
            raise ShapeError(f"adadelta_step[{name}]", x.shape, grads[name].shape)
    if not any(g.any() for g in grads.values()):
        # An all-zero gradient is a no-op on parameters and state
        return

    for name, x in params.items():
        g = grads[name]
        eg2 = state.sq_grad[name]
        edx2 = state.sq_update[name]
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        dx = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * g
        edx2 *= rho
        edx2 += (1.0 - rho) * dx * dx
        x += dx
