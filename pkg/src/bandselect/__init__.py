"""Spectral band selection toolkit.

Builds labelled superpixel datasets from multiband rasters, extracts
co-occurrence texture descriptors per band, searches band subsets with a
univariate marginal distribution algorithm whose fitness is SVM balanced
accuracy, and scores classification/segmentation outputs.
"""

from ._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
