"""Privacy-preserving aggregation toolkit with two semi-honest servers.

Data owners encrypt once under per-user variant-Paillier keys; a service
provider aggregates and masks ciphertexts; a compute party holding the strong
trapdoor decrypts only masked values; results return through a fresh Paillier
key whose private half is gated by ciphertext-policy attribute-based
encryption. The harness simulates all five roles over an in-process bus and
accounts every operation and transported byte.
"""

from . import arith, cpabe, harness, paillier, policy, protocol, shamir, vphe
from .counting import OpCounters, counting
from .errors import SamaError

__version__ = "0.1.0"

__all__ = [
    "OpCounters",
    "SamaError",
    "arith",
    "counting",
    "cpabe",
    "harness",
    "paillier",
    "policy",
    "protocol",
    "shamir",
    "vphe",
]
