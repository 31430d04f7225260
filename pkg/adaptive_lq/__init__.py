"""
Marks "adaptive_lq" as a proper Python package.

Run experiments from the project root with either

    alq run --preset sec4_1

or, without installing the console script,

    python -m adaptive_lq run --preset sec4_1
"""
__version__ = "1.0.0"
