"""Минимальный движок тензоров с обратным дифференцированием"""

from .gradcheck import GradcheckResult, gradcheck
from .tensor import DEFAULT_DTYPE, Tensor, get_dtype, is_grad_enabled, no_grad, precision

__all__ = [
    "DEFAULT_DTYPE",
    "GradcheckResult",
    "Tensor",
    "get_dtype",
    "gradcheck",
    "is_grad_enabled",
    "no_grad",
    "precision",
]
