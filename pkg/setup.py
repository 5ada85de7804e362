from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    # pure Python fallback only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "adrsig._ckernels",
                ["src/adrsig/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
