"""CLuP detectors for binary linear systems, the matching ML theory curve, and a BER harness."""

__version__ = "0.1.0"
