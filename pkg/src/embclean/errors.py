"""Exception types shared across the package."""


class EmbcleanError(Exception):
    """Base class for all errors raised by embclean."""


class InputError(EmbcleanError, ValueError):
    """A problem with user-supplied data or configuration.

    The CLI maps these to exit code 1; anything else is an internal
    error and exits with code 2.
    """
