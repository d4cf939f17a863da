from .summary import describe_column, rolling_mean
from .matrix import normalize_rows, pairwise_distances

__all__ = ["describe_column", "rolling_mean", "normalize_rows", "pairwise_distances"]
version = "1.0"
