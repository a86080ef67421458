"""Traffic salient-object detection toolkit built around 2D selective scans.

Submodules: :mod:`scan2d` (grid traversal orders), :mod:`ssm_kernel`
(state-space recurrences), :mod:`freq` (DCT band splitting),
:mod:`network` (desk-scale model with analytic gradients), :mod:`metrics`
(SOD evaluation) and :mod:`dataset_tools` (TSOD10K naming and splits).
"""

from . import dataset_tools, freq, metrics, scan2d, ssm_kernel

__version__ = "0.1.0"

__all__ = ["dataset_tools", "freq", "metrics", "scan2d", "ssm_kernel", "__version__"]
