"""fedmc: federated-averaging simulation and mode-connectivity measurement
for two-layer ReLU networks."""

__version__ = "0.1.0"
