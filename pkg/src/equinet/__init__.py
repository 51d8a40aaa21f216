"""Permutation-equivariant multidimensional graph networks for wireless precoding.

Subpackages and modules:

* :mod:`equinet.tensor` - permutation utilities on tensors
* :mod:`equinet.equivariance` - set signatures, orbit bases, commutation checks
* :mod:`equinet.autodiff`, :mod:`equinet.nn`, :mod:`equinet.training` - layers and training
* :mod:`equinet.problems` - objectives, projections and model heads
* :mod:`equinet.channels` - channel generators
* :mod:`equinet.baselines` - classical reference algorithms
* :mod:`equinet.toolkit` - complexity counts, file formats, configs and the CLI
"""

__version__ = "0.1.0"
