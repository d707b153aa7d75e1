"""Exception types shared across the package.

The CLI maps these onto its exit-code taxonomy: usage errors exit 1,
FormatError/ContractError exit 2, numeric failures exit 3.
"""


class UVShadeError(Exception):
    """Base class for package errors."""


class FormatError(UVShadeError):
    """A file or in-memory buffer violates a declared format contract.

    Messages carry a byte offset or row number whenever one is known.
    """


class ContractError(UVShadeError):
    """Inputs violate an operation precondition (shape, range, mask mismatch)."""


class FitDivergedError(UVShadeError):
    """The optimizer produced a non-finite loss; carries the state at abort."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
