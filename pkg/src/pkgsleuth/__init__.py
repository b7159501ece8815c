"""pkgsleuth: adversarially robust detection of malicious PyPI packages.

The toolkit extracts a 384-dimension static feature vector per package
release, trains threshold-tunable tree ensembles, generates
functionality-preserving adversarial variants of packages, and hardens
detectors through adversarial training.
"""

__version__ = "0.1.0"
