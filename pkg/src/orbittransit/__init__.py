"""Energy-aware delivery of bulk Earth-observation data over LEO satellite networks.

Orbits are collapsed into graph nodes, downlinks are spread across
neighbouring orbits, and each task is carried on its satellite, relayed over
inter-satellite links, or both, under storage, link and battery limits.
"""

__version__ = "0.1.0"
