"""Exception hierarchy shared by all sama modules."""


class SamaError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(SamaError, ValueError):
    """Setup parameters violate a precondition (sizes, enums, pool shape)."""


class DomainError(SamaError):
    """An L-function input was not ≡ 1 mod n: malformed ciphertext or wrong trapdoor."""


class NotInvertible(SamaError):
    """Modular inverse requested for a non-unit."""


class SearchExhausted(SamaError):
    """Randomized search (prime generation) hit its attempt bound."""


class PoolExhausted(SamaError):
    """All weak-key factor subsets of the system pool are allocated."""


class PlaintextOutOfRange(SamaError, ValueError):
    """Plaintext outside [0, n)."""


class KeyMismatch(SamaError):
    """Operation mixed material belonging to different key identities."""


class MaskAlreadyConsumed(SamaError):
    """A one-time mask record was presented for demasking twice."""


class UnknownDataOwner(SamaError):
    """Referenced data owner is not enrolled."""


class EmptyRange(SamaError):
    """Aggregation requested over an empty ciphertext range."""


class NoData(SamaError):
    """A selected data owner has no stored uploads."""


class PolicySyntaxError(SamaError):
    """Access-policy text failed to parse.

    Attributes:
      position: character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class MalformedTree(SamaError, ValueError):
    """Access tree violates gate invariants (e.g. threshold above child count)."""


class UnknownAttribute(SamaError):
    """Attribute not present in the declared universe."""


class EmptyUniverse(SamaError, ValueError):
    """Attribute universe must be nonempty."""


class PolicyNotSatisfied(SamaError):
    """Requester attributes do not satisfy the access policy."""


class IntegrityError(SamaError):
    """Ciphertext failed authentication despite a satisfied policy."""


class UnknownEndpoint(SamaError):
    """Message addressed to a role with no registered handler."""


class ProtocolError(SamaError):
    """Malformed or out-of-contract protocol message (including unknown tags)."""
