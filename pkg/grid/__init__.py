"""Grid generation with prescribed Jacobian determinant and curl."""

__version__ = '1.0.0'
