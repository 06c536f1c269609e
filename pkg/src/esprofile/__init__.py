"""Error sensitivity profiling for tabular classifiers.

Corrupt the training data of a classifier in controlled steps, measure how
its test performance responds, and summarise the response as a correlation,
a normalised area and a vector of regional slopes.
"""

__version__ = "0.1.0"
