"""rvelab: Monte-Carlo laboratory for apparent properties of random
particle composites.

Generates non-overlapping particle microstructures (mechanical contraction,
sequential addition and migration, random sequential adsorption) under
periodized and snapshot sampling protocols, rasterizes them, solves the
periodic thermal corrector problem with an FFT polarization scheme, and
aggregates systematic/random-error statistics across cell sizes.
"""

__version__ = "0.1.0"
