'''
Counter-based random streams.

A stream is a numpy Philox generator whose 128-bit key packs (seed, stream index).
Draws inside a stream are consumed in entry order, so entry e of stream (seed, i)
is fixed regardless of how trials are scheduled across workers.
'''

import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, index: int, salt: int = 0) -> np.random.Generator:
    '''Return the generator for stream ``index`` under ``seed``.

    ``salt`` separates independent uses of the same (seed, index) pair, for example
    matrix entries versus the angles drawn by a statistics routine.
    '''
    key = ((seed & MASK64) << 64) | (((index << 8) | (salt & 0xFF)) & MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def complex_box_muller(gen: np.random.Generator, size: int) -> np.ndarray:
    '''
    Standard complex Gaussians with E|X|^2 = 1 via Box-Muller.

    The radius sqrt(-ln u1) gives |X|^2 ~ Exp(1); the uniform phase makes the real and
    imaginary parts independent N(0, 1/2).
    '''
    u = gen.random((size, 2))
    radius = np.sqrt(-np.log1p(-u[:, 0]))
    return radius * np.exp(2j * np.pi * u[:, 1])
