"""Import shims for running on Python 3.10."""

try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of ``enum.StrEnum``: members are strings and format as their value."""

        __str__ = str.__str__
        __format__ = str.__format__
