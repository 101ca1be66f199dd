"""Channel estimation for NOMA mmWave massive MIMO: simulator, classical baselines and a CNN refiner."""

__version__ = "0.1.0"
