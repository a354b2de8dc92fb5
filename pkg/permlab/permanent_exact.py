'''
Exact permanent oracles.

permanent_naive sums over all permutations; permanent_ryser runs the inclusion-exclusion
formula over column subsets in Gray-code order, one numpy block of subsets at a time.
Both use compensated summation for the outer sum.
'''

import itertools
import logging
import math

import numpy as np

from permlab.common.errors import DimensionTooLarge
from permlab.matrix_core import ComplexMatrix

logger = logging.getLogger('permlab.permanent_exact')

NAIVE_CAP = 10
RYSER_CAP = 30
GRAY_CHUNK = 1 << 14
LOG_DIAGNOSTIC_THRESHOLD = 1e250


class KahanSum:
    '''Compensated accumulator for complex terms'''

    def __init__(self) -> None:
        self.total = 0j
        self.compensation = 0j

    def add(self, term: complex) -> None:
        y = term - self.compensation
        t = self.total + y
        self.compensation = (t - self.total) - y
        self.total = t


def permanent_naive(a: ComplexMatrix, cap: int = NAIVE_CAP) -> complex:
    '''Permutation-sum permanent, permutations visited in lexicographic order'''
    if a.n > cap:
        raise DimensionTooLarge(f"naive permanent limited to n <= {cap}", n=a.n, cap=cap)
    entries = a.entries
    rows = range(a.n)
    acc = KahanSum()
    for sigma in itertools.permutations(range(a.n)):
        term = 1 + 0j
        for i in rows:
            term *= complex(entries[i, sigma[i]])
        acc.add(term)
    return acc.total


def permanent_ryser(a: ComplexMatrix, cap: int = RYSER_CAP, chunk: int = GRAY_CHUNK) -> complex:
    '''
    Ryser's formula Per(A) = (-1)^n sum_S (-1)^|S| prod_i sum_{j in S} a_ij.

    Subsets are enumerated in Gray-code order in blocks of ``chunk``: the row sums of a
    block's first subset are formed directly and the rest follow by a running sum of
    +/- the one column flipped at each code. Code k flips the column of k's lowest set
    bit and the parity of |S| equals the parity of k.
    '''
    n = a.n
    if n > cap:
        raise DimensionTooLarge(f"Ryser permanent limited to n <= {cap}", n=n, cap=cap)
    entries = a.entries
    columns = entries.T
    bits = np.arange(n, dtype=np.int64)
    acc = KahanSum()
    for start in range(0, 1 << n, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        gray = codes ^ (codes >> 1)
        base = entries @ ((gray[0] >> bits) & 1).astype(np.float64)
        tail = codes[1:]
        flipped = np.log2(tail & -tail).astype(np.int64)
        added = np.where((gray[1:] >> flipped) & 1 == 1, 1.0, -1.0)
        rowsums = np.empty((codes.size, n), dtype=np.complex128)
        rowsums[0] = base
        rowsums[1:] = base + np.cumsum(added[:, None] * columns[flipped], axis=0)
        signs = np.where(codes % 2 == 0, 1.0, -1.0)
        acc.add(complex(np.prod(rowsums, axis=1) @ signs))

    result = acc.total if n % 2 == 0 else -acc.total
    if abs(result) > LOG_DIAGNOSTIC_THRESHOLD:
        logger.warning(f"Permanent magnitude large: log10|Per| = {math.log10(abs(result)):.2f}")
    return result


def subset_masks(k: int) -> np.ndarray:
    '''All 2^k column subsets as a (2^k, k) 0/1 matrix, subset index as bitmask'''
    codes = np.arange(1 << k, dtype=np.int64)
    return ((codes[:, None] >> np.arange(k)) & 1).astype(np.float64)


def permanent_ryser_batch(stack: np.ndarray) -> np.ndarray:
    '''
    Permanents of a stack of k x k matrices, shape (batch, k, k), by vectorised Ryser.
    '''
    stack = np.asarray(stack, dtype=np.complex128)
    batch, k = stack.shape[0], stack.shape[-1]
    if k == 0:
        return np.ones(batch, dtype=np.complex128)
    masks = subset_masks(k)
    signs = np.where((k - masks.sum(axis=1)) % 2 == 0, 1.0, -1.0)
    rowsums = stack @ masks.T
    return np.prod(rowsums, axis=1) @ signs
