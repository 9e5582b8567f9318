"""doeopt: process-optimization engine for design-of-experiments tables.

Cleans raw experimental tables into a reduced, replayable form, selects
informative parameters, fits multi-output surrogate models, runs a steerable
multi-objective optimizer over them, and reconstructs complete recipes from
the reduced solutions.
"""

__version__ = "0.1.0"
