"""chandyn: wideband wireless channel dynamics workbench.

Synthesizes time-varying multipath channels on OFDM grids, assembles
normalized prediction samples, trains small convolutional predictors
(AE/UNet across three input-output pairings), benchmarks them against a
per-pixel AR/Kalman baseline and quantifies the downstream MRT precoding
impact via epsilon-outage capacity.
"""

from . import arkalman, chanmodel, dataset, evalsuite, neuralnet, pipeline

__version__ = "0.1.0"

__all__ = ["arkalman", "chanmodel", "dataset", "evalsuite", "neuralnet",
           "pipeline", "__version__"]
