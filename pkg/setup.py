"""Build script for the optional compiled kernels.

The package works without them: ``ioncorr._backend`` falls back to the
numpy implementations in ``ioncorr._kernels_py`` when the extension is
missing or ``IONCORR_BACKEND=python`` is set.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

extensions = [
    Extension(
        "ioncorr._kernels",
        ["src/ioncorr/_kernels.pyx"],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"})
    if cythonize is not None
    else [],
)
