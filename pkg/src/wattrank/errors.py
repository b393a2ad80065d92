"""Common exception base so the CLI can map failures onto exit codes."""


class WattrankError(Exception):
    """Base class for every error raised by this package."""
