"""Cryptographically secure randomness and hardened samplers.

The generator is a ChaCha20 keystream (a recognized cryptographic stream
construction; Mersenne-Twister-class generators are deliberately absent).
Sources are keyed only from operating-system entropy or by derivation from
another source.  There is no integer-seed constructor, no seed flag and no
way to persist a seed: that is the API contract, not an omission.

All samplers draw exclusively from the RandomSource they are handed, so a
scripted stand-in (see dpcore.testing) makes them deterministic in tests.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

__all__ = [
    "RandomSource",
    "derive_source",
    "LogWeight",
    "log_add",
    "sample_laplace",
    "sample_snapped_laplace",
    "sample_gaussian",
    "sample_exponential",
    "sample_two_sided_geometric",
]

_KEY_BYTES = 32
_ZERO_NONCE = bytes(16)


class RandomSource:
    """Opaque CSPRNG handle over a ChaCha20 keystream.

    Construct via :meth:`from_os_entropy` or :func:`derive_source` only.
    A source is confined to one execution context at a time; hand each
    parallel worker its own derived source.
    """

    __slots__ = ("_encryptor", "_buffer")

    def __init__(self, *, _key: bytes | None = None) -> None:
        # No user-facing seed path: the only key material accepted is the
        # module-internal derivation hook; everything else is OS entropy.
        key = _key if _key is not None else os.urandom(_KEY_BYTES)
        cipher = Cipher(algorithms.ChaCha20(key, _ZERO_NONCE), mode=None)
        self._encryptor = cipher.encryptor()
        self._buffer = b""

    @classmethod
    def from_os_entropy(cls) -> "RandomSource":
        return cls()

    # -- raw stream ---------------------------------------------------------

    def bytes(self, n: int) -> bytes:
        out = self._encryptor.update(bytes(n))
        return out

    def u64(self, n: int) -> np.ndarray:
        """n independent uniform 64-bit words."""
        return np.frombuffer(self.bytes(8 * n), dtype=np.uint64).copy()

    def randbits(self, k: int) -> int:
        nbytes = (k + 7) // 8
        value = int.from_bytes(self.bytes(nbytes), "big")
        return value >> (8 * nbytes - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("randbelow requires n > 0")
        k = n.bit_length()
        while True:
            r = self.randbits(k)
            if r < n:
                return r

    # -- uniforms -----------------------------------------------------------

    def uniform(self, n: int | None = None):
        """Uniform float64 in (0, 1) at 2^-64 granularity near the top.

        Used for bulk work where the full dyadic-precision variant below is
        unnecessary.
        """
        m = self.u64(n if n is not None else 1)
        out = (m.astype(np.float64) + 0.5) * 2.0 ** -64
        return out if n is not None else float(out[0])

    def uniform_full(self, n: int | None = None):
        """Uniform over representable floats in (0, 1), not just a 2^-53 grid.

        The significand fills all 52 explicit mantissa bits and the exponent
        is geometric(1/2), so every dyadic range [2^-k-1, 2^-k) is reachable
        with the correct mass.  This is the uniform behind the inverse-CDF
        samplers.
        """
        size = n if n is not None else 1
        mant = (self.u64(size) >> np.uint64(12)) | np.uint64(1 << 52)
        shift = np.zeros(size, dtype=np.int64)
        pending = np.arange(size)
        while pending.size:
            words = self.u64(pending.size)
            zero = words == 0
            # ChaCha output word == 0 has probability 2^-64; just add 64
            # leading zeros and continue for those lanes.
            nonzero = pending[~zero]
            w = words[~zero]
            low = (w & (~w + np.uint64(1))).astype(np.float64)  # lowest set bit
            shift[nonzero] += np.frexp(low)[1] - 1  # its index = trailing zeros
            shift[pending[zero]] += 64
            pending = pending[zero]
        out = np.ldexp(mant.astype(np.float64), -53 - shift)
        return out if n is not None else float(out[0])

    def signs(self, n: int | None = None):
        """Independent +/-1 values."""
        size = n if n is not None else 1
        s = ((self.u64(size) & np.uint64(1)).astype(np.float64) * 2.0) - 1.0
        return s if n is not None else float(s[0])


def derive_source(parent: RandomSource) -> RandomSource:
    """Child stream keyed from the parent's output.

    Distinct derivations consume distinct key material, so the streams are
    distinct and statistically independent of the parent's future output.
    """
    return RandomSource(_key=parent.bytes(_KEY_BYTES))


# ---------------------------------------------------------------------------
# Log-domain arithmetic.
# ---------------------------------------------------------------------------

def log_add(x: float, y: float) -> float:
    """log(a + b) given x = log a and y = log b, without leaving log scale.

    -inf is a valid input (a = 0) and acts as the additive identity; finite
    inputs never overflow.
    """
    if x == -math.inf:
        return y
    if y == -math.inf:
        return x
    z, v = (x, y) if x >= y else (y, x)
    return z + math.log1p(math.exp(v - z))


@dataclass(frozen=True)
class LogWeight:
    """A nonnegative weight stored as its natural log, end to end."""

    value: float

    def __add__(self, other: "LogWeight") -> "LogWeight":
        return LogWeight(log_add(self.value, other.value))

    @classmethod
    def zero(cls) -> "LogWeight":
        return cls(-math.inf)


# ---------------------------------------------------------------------------
# Samplers.  Every sampler takes its RandomSource explicitly and exposes its
# scale through the returned values' construction only; the epsilon-floor
# rule (eps/sensitivity >= 1e-3) is enforced one layer up, in mechanisms.
# ---------------------------------------------------------------------------

def sample_exponential(rng: RandomSource, scale: float, size: int | None = None):
    """Exp(scale) on [0, inf), via -scale * ln(U) on a full-precision uniform."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    u = rng.uniform_full(size if size is not None else 1)
    out = -scale * np.log(u)
    return out if size is not None else float(out[0])


def sample_laplace(rng: RandomSource, scale: float, size: int | None = None):
    """Laplace(0, scale): a random sign on an Exp(scale) magnitude.

    Equivalent to inverse-CDF sampling with a symmetric full-precision
    uniform, without the precision loss of forming 1 - 2|u|.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    n = size if size is not None else 1
    out = rng.signs(n) * (-scale * np.log(rng.uniform_full(n)))
    return out if size is not None else float(out[0])


def sample_gaussian(rng: RandomSource, sigma: float, size: int | None = None):
    """N(0, sigma^2) via Box-Muller on full-precision uniforms."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    n = size if size is not None else 1
    u1 = rng.uniform_full(n)
    u2 = rng.uniform(n)
    out = sigma * np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
    return out if size is not None else float(out[0])


def _round_to_ladder(value: float, lam: float) -> float:
    """Round to the nearest multiple of lam, ties toward +inf."""
    q = math.floor(value / lam)
    rem = value - q * lam
    if rem > lam / 2:
        return (q + 1) * lam
    if rem == lam / 2:
        return (q + 1) * lam
    return q * lam


def _power_of_two_at_least(x: float) -> float:
    """Smallest power of two >= x (x > 0)."""
    m, e = math.frexp(x)  # x = m * 2^e with m in [0.5, 1)
    return math.ldexp(1.0, e if m > 0.5 else e - 1)


def sample_snapped_laplace(
    rng: RandomSource, true_value: float, scale: float, clamp: float
) -> float:
    """Floating-point-hardened Laplace release of a single value.

    Pipeline: clamp the input to [-B, B]; add scale * S * ln(U) with S a
    random sign and U a full-precision uniform, using the exact-rounded
    natural log; round the result onto the ladder of multiples of the
    smallest power of two >= scale (ties toward +inf); clamp again.
    Rounding to the power-of-two ladder is exact in binary floating point,
    which removes the output "holes" of the textbook inverse-CDF sampler.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if clamp < 0:
        raise ValueError("clamp bound must be nonnegative")
    b = clamp
    f = min(max(true_value, -b), b)
    u = rng.uniform_full()
    s = rng.signs()
    noisy = f + scale * s * math.log(u)
    lam = _power_of_two_at_least(scale)
    snapped = _round_to_ladder(noisy, lam)
    return min(max(snapped, -b), b)


def sample_two_sided_geometric(rng: RandomSource, alpha: float, size: int | None = None):
    """Two-sided geometric: P(k) proportional to alpha^|k|, k integer.

    Sampled as the difference of two i.i.d. geometric variables, each drawn
    by exact inversion in rational arithmetic (no floating-point CDF), so
    the distribution is exact up to the 128-bit uniform resolution.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must be in (0, 1)")
    a = Fraction(alpha)

    def one_geometric() -> int:
        # Invert P(G < k) = 1 - alpha^k against a 128-bit uniform rational.
        u = Fraction(rng.randbits(128), 1 << 128)  # in [0, 1)
        tail = Fraction(1)  # alpha^k
        k = 0
        target = 1 - u  # find smallest k with alpha^k < 1 - u ... tail <= target
        while tail > target:
            tail *= a
            k += 1
        return k - 1 if k > 0 else 0

    def one() -> int:
        return one_geometric() - one_geometric()

    if size is None:
        return one()
    return np.array([one() for _ in range(size)], dtype=np.int64)
