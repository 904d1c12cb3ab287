"""Backend selection for the hot inner loops.

Prefers the compiled Cython extension; falls back to the pure-numpy
implementation when the extension was not built.
"""

try:
    from ._hot_c import css_residuals, smo_solve

    COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    from ._hot_py import css_residuals, smo_solve

    COMPILED = False

__all__ = ["smo_solve", "css_residuals", "COMPILED"]
