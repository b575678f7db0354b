class LexphyloError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LexphyloError):
    """Input text does not follow the expected file layout."""


class ValidationError(LexphyloError):
    """Input parsed but violates a data invariant."""


class ParseError(LexphyloError):
    """Syntax error in a Newick or Nexus document."""

    def __init__(self, message, position=None, line=None):
        self.position = position
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DomainError(LexphyloError, ValueError):
    """Numeric argument outside its admissible domain."""
