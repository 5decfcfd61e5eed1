"""Loss functions and the argmin rule shared by every selector.

Keeping both in one place is what makes the selectors comparable: a feature
sequence can only be reproduced across algorithms if they score candidates
with the same loss and break ties the same way.
"""

from __future__ import annotations

import enum

import numpy as np


class LossFunction(str, enum.Enum):
    SQUARED = "squared"
    ZERO_ONE = "zero_one"

    def total(self, y, p, axis=-1):
        """Summed loss of predictions ``p`` against labels ``y`` along ``axis``.

        Zero-one counts ``y * p <= 0`` as a mistake, so a zero prediction is
        always wrong.
        """
        y = np.asarray(y)
        p = np.asarray(p)
        if self is LossFunction.SQUARED:
            r = y - p
            return np.sum(r * r, axis=axis)
        return np.count_nonzero(y * p <= 0, axis=axis).astype(np.float64)

    def check_labels(self, y) -> None:
        if self is LossFunction.ZERO_ONE and not np.all(np.abs(np.asarray(y)) == 1.0):
            raise ValueError("zero_one loss requires labels in {-1, +1}")


def as_loss(loss) -> LossFunction:
    return loss if isinstance(loss, LossFunction) else LossFunction(loss)


class ArgminTracker:
    """Running strict-``<`` minimum; the first candidate seen wins ties.

    Candidates must be offered in increasing feature-index order.
    """

    def __init__(self):
        self.best = None
        self.error = np.inf

    def offer(self, index: int, error: float) -> bool:
        if error < self.error or self.best is None:
            self.best, self.error = index, float(error)
            return True
        return False

    def offer_block(self, indices, errors) -> bool:
        """Offer a block at once; ``np.argmin`` returns the first minimum."""
        if len(indices) == 0:
            return False
        j = int(np.argmin(errors))
        return self.offer(int(indices[j]), errors[j])
