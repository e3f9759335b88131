"""Anisotropic spiking network with Loihi-style neurons, pooling readout and analysis."""
