"""
Base classes for pincer specific exceptions, primarily used in deciding
which exit code a command returns and which errors are reported.
"""


class BaseInputError(Exception):
    """Base class for errors caused by invalid input data."""


class BaseProcessingError(Exception):
    """Base class for failures while processing valid input."""


class PCDParseError(BaseInputError):
    """Exception raised for malformed point cloud files."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = 'line %s: %s' % (lineno, message)
        super(PCDParseError, self).__init__(message)
        self.lineno = lineno


class CloudError(BaseInputError):
    """Exception raised for invalid point cloud contents or arguments."""


class ViewConflictError(CloudError):
    """Exception raised when merging clouds sharing a view id."""


class EmptyCloudError(BaseInputError):
    """Exception raised when a stage needs points but has none."""


class ConfigError(BaseInputError):
    """Exception raised for invalid configuration values."""


class DatasetError(BaseInputError):
    """Exception raised for malformed descriptor datasets."""


class ModelFormatError(BaseInputError):
    """Exception raised for unreadable model files."""


class DimensionMismatchError(BaseInputError):
    """Exception raised when a row does not match the expected size."""


class SingleClassError(BaseInputError):
    """Exception raised when training data lacks one of the classes."""


class FoldError(BaseInputError):
    """Exception raised when folds cannot be stratified."""


class MissingNormalsError(BaseInputError):
    """Exception raised when labeling a cloud without normals."""


class TooFewPointsError(BaseProcessingError):
    """Exception raised when a neighborhood is too small to fit."""


class DegenerateNeighborhoodError(BaseProcessingError):
    """Exception raised when a surface fit has no unique solution."""


class VanishingGradientError(BaseProcessingError):
    """Exception raised when a surface normal is undefined."""


class PlacementError(BaseProcessingError):
    """Exception raised when a clutter scene cannot be placed."""


class PoseError(BaseInputError):
    """Exception raised for rotations that are not proper rigid motions."""
