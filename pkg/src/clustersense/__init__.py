"""Cluster-state quantum metrology toolkit.

Subpackages by concern:

* :mod:`clustersense.simcore`  - dense state-vector simulation (ground truth)
* :mod:`clustersense.probes`   - unary-subspace probe states and prep circuits
* :mod:`clustersense.compress` - unary-to-binary compression circuit and QFT
* :mod:`clustersense.mbqc`     - cluster states and measurement patterns
* :mod:`clustersense.estimate` - local and Bayesian phase/frequency estimation
* :mod:`clustersense.cli`      - estimation-curve CSV output and verification CLI
"""

from . import compress, estimate, mbqc, probes, simcore

__all__ = ["simcore", "probes", "compress", "mbqc", "estimate"]
__version__ = "0.1.0"
