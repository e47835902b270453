"""
GF(3^m) arithmetic tables
Primitive polynomial search, the antilog table and the absolute trace to GF(3).
"""

import logging
from functools import cached_property, lru_cache
from typing import List, Tuple

import numpy as np

from relzk.errors import ConstructionError

logger = logging.getLogger(__name__)


def _order_of_x(coeffs: Tuple[int, ...], limit: int) -> int:
    """Multiplicative order of x modulo the monic polynomial x^m + sum coeffs[i] x^i"""
    m = len(coeffs)
    state = [1] + [0] * (m - 1)
    for step in range(1, limit + 1):
        top = state[-1]
        state = [0] + state[:-1]
        if top:
            state = [(s - top * c) % 3 for s, c in zip(state, coeffs)]
        if state[0] == 1 and not any(state[1:]):
            return step
    return 0


def find_primitive_polynomial(m: int) -> Tuple[int, ...]:
    """Lowest-code monic degree-m polynomial over GF(3) whose root generates GF(3^m)*"""
    if m < 1:
        raise ValueError(f"degree must be positive, got {m}")
    order = 3 ** m - 1
    for code in range(3 ** m):
        coeffs = tuple((code // 3 ** i) % 3 for i in range(m))
        if coeffs[0] == 0:
            continue
        if _order_of_x(coeffs, order) == order:
            return coeffs
    raise ConstructionError("no primitive polynomial found", degree=m)


class GaloisField:
    """
    GF(3^m) with elements written as coefficient vectors in the power basis of a
    primitive element alpha. Exponents are taken modulo order = 3^m - 1.
    """

    def __init__(self, m: int):
        self.m = m
        self.order = 3 ** m - 1
        self.modulus = find_primitive_polynomial(m)
        logger.debug(f"GF(3^{m}) modulus coefficients {self.modulus}")

    @cached_property
    def antilog(self) -> np.ndarray:
        """Row k holds the coefficients of alpha^k"""
        table = np.zeros((self.order, self.m), dtype=np.int64)
        state: List[int] = [1] + [0] * (self.m - 1)
        for k in range(self.order):
            table[k] = state
            top = state[-1]
            state = [0] + state[:-1]
            if top:
                state = [(s - top * c) % 3 for s, c in zip(state, self.modulus)]
        table.setflags(write=False)
        return table

    @cached_property
    def traces(self) -> np.ndarray:
        """traces[k] = Tr(alpha^k) in {0,1,2}"""
        exponents = np.arange(self.order, dtype=np.int64)
        frobenius = 3 ** np.arange(self.m, dtype=np.int64)
        conjugates = (exponents[:, None] * frobenius[None, :]) % self.order
        total = self.antilog[conjugates].sum(axis=1) % 3
        if np.any(total[:, 1:]):
            raise ConstructionError("trace left the prime field", degree=self.m)
        values = total[:, 0].astype(np.int8)
        values.setflags(write=False)
        return values


@lru_cache(maxsize=16)
def galois_field(m: int) -> GaloisField:
    return GaloisField(m)
