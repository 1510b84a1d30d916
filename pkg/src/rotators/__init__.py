"""Mean-field rotators on the circle: stationary profiles, the H^-1 geometry of
the synchronized manifold, particle simulation, the Fokker-Planck limit and the
spectrum of its linearization."""

__version__ = "0.1.0"
