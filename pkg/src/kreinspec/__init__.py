"""Indefinite Sturm-Liouville problems with eigenparameter-dependent boundary conditions.

Shooting solver, boundary-data classification, Krein-space inner products,
Riesz-basis diagnostics and grid certification of positive operators that
preserve the form domain.
"""

__version__ = "0.1.0"
