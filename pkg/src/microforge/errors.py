"""Exception hierarchy shared by all generators and the CLI."""


class MicroforgeError(Exception):
    """Base class for all package errors."""


class ConfigError(MicroforgeError):
    """Invalid configuration or parameter value (CLI exit code 2)."""


class GenerationError(MicroforgeError):
    """A generator could not produce a valid result (CLI exit code 3)."""


class FormatError(MicroforgeError):
    """A volume file or sidecar does not match its declaration."""
