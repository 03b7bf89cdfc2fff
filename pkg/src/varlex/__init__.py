"""Numerical toolkit for variable-exponent Lebesgue spaces.

Modules
-------
grid         boxes, cubes, uniform grids and sampled functions
exponents    exponent fields, log-Hoelder estimates, derived exponents
norms        modular and Luxemburg norm
operators    Riesz potentials and the fractional Laplacian
weights      power weights and the two-weight cube condition
inequalities Hardy, Sobolev, Gagliardo-Nirenberg and Poincare harnesses
pde_demo     degenerate variable-exponent Neumann problem
cli          command-line interface
"""

__version__ = "0.1.0"
