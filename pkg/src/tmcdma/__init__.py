"""Synchronous DS-CDMA multiuser detection and analytic SNR modelling.

Subpackages
-----------
baseband
    Spreading codes, chip-level transmission, AWGN and the matched filter bank.
detect
    Conventional, decorrelating, ML, neighbor-descent and transformation
    matrix detectors, plus the change-of-basis helpers they use.
snrmodel
    Complexity profiles and the complexity-driven SNR formulas.
montecarlo
    End-to-end BER / empirical SNR simulation and scenario sweeps.
cli
    Command line front end (``tmcdma``).
"""

__version__ = "0.1.0"
