"""Exception hierarchy shared by all modules."""


class QTCError(Exception):
    """Base class for library errors."""


class InvalidInputError(QTCError, ValueError):
    """Malformed or inconsistent input (shape, Hermiticity, ranges)."""


class DomainError(QTCError, ValueError):
    """A scalar function was evaluated outside of its domain."""


class SingularStateError(QTCError, ValueError):
    """A full-rank state was required but the input is (numerically) singular."""


class SupportError(QTCError, ValueError):
    """supp(rho) is not contained in supp(sigma)."""


class NonPrimitiveError(QTCError):
    """The generator has a kernel of dimension larger than one."""


class ResourceLimitError(QTCError):
    """Requested computation exceeds the configured dimension/size caps."""


class DegenerateObservableError(QTCError, ValueError):
    """Observable has vanishing Lipschitz constant (proportional to identity)."""


class UninformativeFamilyError(QTCError, ValueError):
    """Parametric family with (numerically) vanishing Fisher information."""


class InternalConsistencyError(QTCError):
    """Two quantities that must be ordered came out inverted."""
