"""Arithmetic sieves used by the Möbius-weighted averages"""
from functools import lru_cache
from typing import Tuple

import numpy as np


def prime_sieve(nmax: int) -> Tuple[np.ndarray, np.ndarray]:
    """Eratosthenes sieve up to nmax (inclusive).

    Returns:
        (primes, is_prime) with is_prime of length nmax + 1
    """
    if nmax < 2:
        return np.array([], dtype=np.int64), np.zeros(nmax + 1, dtype=bool)

    is_prime = np.ones(nmax + 1, dtype=bool)
    is_prime[0] = is_prime[1] = False
    for i in range(2, int(nmax ** 0.5) + 1):
        if is_prime[i]:
            is_prime[i * i::i] = False

    primes = np.nonzero(is_prime)[0].astype(np.int64)
    return primes, is_prime


@lru_cache(maxsize=4)
def mobius_table(nmax: int) -> np.ndarray:
    """Möbius function mu(n) for n = 0..nmax as an int8 array (mu[0] = 0).

    Every prime p flips the sign of its multiples; multiples of p^2 are zeroed.
    """
    mu = np.ones(nmax + 1, dtype=np.int8)
    mu[0] = 0
    primes, _ = prime_sieve(nmax)
    for p in primes:
        p = int(p)
        mu[p::p] *= -1
        square = p * p
        if square <= nmax:
            mu[square::square] = 0
    mu.setflags(write=False)
    return mu
