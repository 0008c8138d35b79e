"""Numeric core: dense-matrix layers, differentiation and the Adam update.

Dense matrices are float64 torch tensors. Every layer acts on the last two
dimensions (rows, cols) and broadcasts over any leading batch dimensions.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np
import torch
import torch.nn.functional as F

from smartsense.common import NonFiniteLossError
from smartsense.constants import LAYER_NORM_EPS

logger = logging.getLogger(__name__)

DTYPE = torch.float64


def to_dense(values, dtype: torch.dtype = DTYPE) -> torch.Tensor:
    """Convert nested lists, numpy arrays or tensors to a float64 tensor."""
    if isinstance(values, torch.Tensor):
        return values.to(dtype)
    return torch.as_tensor(np.asarray(values, dtype=np.float64), dtype=dtype)


def softmax_rows(M: torch.Tensor) -> torch.Tensor:
    """Row-wise softmax; torch subtracts the row maximum before exponentiating."""
    return torch.softmax(M, dim=-1)


def layer_norm(
    M: torch.Tensor,
    gain: torch.Tensor,
    bias: torch.Tensor,
    eps: float = LAYER_NORM_EPS,
) -> torch.Tensor:
    """Standardize each row (population variance, eps inside the root), then scale and shift."""
    return F.layer_norm(M, (M.shape[-1],), weight=gain, bias=bias, eps=eps)


def dropout(
    M: torch.Tensor,
    p: float,
    training: bool,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) so eval is the identity."""
    if not training or p == 0.0:
        return M
    keep = torch.empty_like(M).bernoulli_(1.0 - p, generator=generator)
    return M * keep / (1.0 - p)


def ensure_finite_loss(loss: torch.Tensor, step: int | None = None) -> float:
    value = float(loss.detach())
    if not math.isfinite(value):
        logger.error("Non-finite loss %r at step %s", value, step)
        raise NonFiniteLossError(value, step)
    return value


def compute_gradients(
    loss: torch.Tensor,
    params: Sequence[torch.Tensor],
    step: int | None = None,
) -> list[torch.Tensor]:
    """Gradients of a recorded scalar loss with respect to every parameter.

    Parameters the loss does not reach get a zero gradient.

    Raises:
        NonFiniteLossError: If the loss is NaN or infinite.
    """
    ensure_finite_loss(loss, step)
    if not loss.requires_grad:
        return [torch.zeros_like(p) for p in params]
    grads = torch.autograd.grad(loss, list(params), allow_unused=True)
    return [
        torch.zeros_like(p) if g is None else g for p, g in zip(params, grads, strict=True)
    ]


class AdamState:
    """First/second moment accumulators and step counter for a parameter list.

    Backed by torch.optim.Adam, whose weight_decay adds l2 * theta to each
    gradient before the moment updates (classic Adam with L2, not AdamW).
    """

    def __init__(
        self,
        params: Sequence[torch.Tensor],
        lr: float,
        l2: float = 0.0,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.optimizer = torch.optim.Adam(
            self.params, lr=lr, betas=betas, eps=eps, weight_decay=l2
        )

    @property
    def t(self) -> int:
        """Number of updates applied so far."""
        states = self.optimizer.state
        if not states:
            return 0
        return int(next(iter(states.values()))["step"])

    def moments(self, param: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor] | None:
        state = self.optimizer.state.get(param)
        if not state:
            return None
        return state["exp_avg"], state["exp_avg_sq"]

    def set_hyperparameters(self, lr: float, l2: float) -> None:
        for group in self.optimizer.param_groups:
            group["lr"] = lr
            group["weight_decay"] = l2


def adam_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: AdamState,
    lr: float,
    l2: float,
) -> Sequence[torch.Tensor]:
    """Apply one bias-corrected Adam update in place and return the parameters."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} parameters but {len(grads)} gradients")
    state.set_hyperparameters(lr, l2)
    for param, grad in zip(params, grads, strict=True):
        if param.shape != grad.shape:
            raise ValueError(
                f"gradient shape {tuple(grad.shape)} != parameter shape {tuple(param.shape)}"
            )
        param.grad = grad.detach().clone()
    state.optimizer.step()
    for param in params:
        param.grad = None
    return params
