"""mpclo: multiparametric conic linear optimization analysis."""

__version__ = "0.1.0"
