from __future__ import annotations

from dataclasses import dataclass

from objlab.store import OpTally, RestOp

# HEAD-container is not named by either provider class; it is billed like HEAD
CLASS_A = frozenset({RestOp.PUT_OBJECT, RestOp.COPY_OBJECT, RestOp.GET_CONTAINER})
CLASS_B = frozenset({RestOp.GET_OBJECT, RestOp.HEAD_OBJECT, RestOp.DELETE_OBJECT, RestOp.HEAD_CONTAINER})


@dataclass(frozen=True)
class PricingModel:
    """Per-request prices in arbitrary currency units."""

    class_a: float = 1.0
    class_b: float = 1.0

    def __post_init__(self):
        if self.class_a < 0 or self.class_b < 0:
            raise ValueError("prices must be >= 0")

    def price(self, op: RestOp) -> float:
        return self.class_a if op in CLASS_A else self.class_b


UNIFORM = PricingModel()


def compute_cost(tally: OpTally, pricing: PricingModel = UNIFORM) -> float:
    return sum(tally[op] * pricing.price(op) for op in RestOp)
