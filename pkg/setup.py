import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:          # fallback kernels are used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension(
            "liplive._kernels._ckernels",
            ["src/liplive/_kernels/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            optional=True,
        )],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
