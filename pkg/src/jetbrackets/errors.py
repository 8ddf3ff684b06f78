"""Exception hierarchy.  The three top-level families map to CLI exit codes."""


class JetBracketsError(Exception):
    """Base class for all library errors."""


class InputError(JetBracketsError):
    """Malformed or inconsistent input text (exit code 2)."""


class ValidationError(JetBracketsError):
    """A fixture or object failed an exact check (exit code 3)."""


class Refusal(JetBracketsError):
    """A computation was declined because its result would be ill defined (exit code 4)."""


# expression algebra
class NonMonomialDivisor(InputError):
    pass


class NonIntegerPowerOfSum(InputError):
    pass


class MissingAssignment(JetBracketsError):
    pass


class ZeroToNegativePower(JetBracketsError):
    pass


class NonIntegerExponentNeedsPositiveBase(JetBracketsError):
    pass


# parsing
class DslSyntaxError(InputError):
    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = "<string>"):
        self.line, self.column, self.source = line, column, source
        super().__init__(f"{source}:{line}:{column}: {message}")


class UndeclaredSymbol(InputError):
    pass


class DuplicateName(InputError):
    pass


class LengthMismatch(InputError):
    pass


# calculus and operators
class NoEvolutionForm(Refusal):
    pass


class ShapeMismatch(JetBracketsError):
    pass


class UnverifiableWithoutR(Refusal):
    pass


# linear algebra and brackets
class NotInSpan(JetBracketsError):
    pass


class DependentBasis(JetBracketsError):
    pass


class NotInRange(Refusal):
    pass


class IllDefinedBracket(Refusal):
    pass


class NoScalingSymmetry(Refusal):
    pass


class UndeclaredPole(Refusal):
    pass


# fixtures
class UnknownFixture(InputError):
    pass


class ValidationFailure(ValidationError):
    def __init__(self, message: str, residual=None):
        self.residual = residual
        super().__init__(message)
