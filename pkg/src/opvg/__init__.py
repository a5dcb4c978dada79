"""Semi-Riemannian geometry with coefficients in a commutative C*-algebra C(X), X finite."""

__version__ = "0.1.0"
