"""Build script for the optional compiled split-search kernel.

The package works without the extension (a numpy fallback is selected at
import); the extension only accelerates tree fitting.  Build failures are
therefore non-fatal (``optional=True``).
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "chordforest.forest._split_cy",
                ["src/chordforest/forest/_split_cy.pyx"],
                include_dirs=[numpy.get_include()],
                # -ffp-contract=off: no FMA fusion, keeps the kernel
                # bit-identical to the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
