import os

from setuptools import Extension, setup

# The compiled ray-cast kernel is optional: viloop._kernels falls back to the
# numpy implementation when the extension is missing.  Set VILOOP_NO_EXT=1 to
# skip compilation entirely.
ext_modules = []
if not os.environ.get("VILOOP_NO_EXT"):
    import numpy
    from Cython.Build import cythonize

    # -ffp-contract=off keeps the compiled kernel bit-identical to the numpy
    # backend (no FMA contraction).
    ext_modules = cythonize(
        [
            Extension(
                "viloop._kernels._raycast",
                ["src/viloop/_kernels/_raycast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off", "-fopenmp"],
                extra_link_args=["-fopenmp"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
