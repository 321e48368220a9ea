"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when user-supplied data or configuration is invalid.

    The CLI maps this to exit code 1; anything else escaping a command is an
    internal error and maps to exit code 2.
    """
