"""Build the optional compiled jet kernel.

The extension links against the libgmp that ships inside the installed gmpy2
wheel so that mpq objects created by gmpy2 and the kernel share one allocator.
If Cython, gmpy2 headers or a compiler are missing the package still installs
and falls back to the pure-Python kernel at import time.
"""
import glob
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            print(f"warning: compiled kernel not built ({exc}); using pure Python", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def _extensions():
    try:
        import gmpy2
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []

    gdir = os.path.dirname(gmpy2.__file__)
    libdir = os.path.join(os.path.dirname(gdir), "gmpy2.libs")
    bundled = sorted(glob.glob(os.path.join(libdir, "libgmp*.so*")))
    link_args, libraries = [], []
    if bundled:
        link_args = [bundled[0], f"-Wl,-rpath,{libdir}"]
    else:
        libraries = ["gmp"]

    ext = Extension(
        "berezin._ckernels",
        ["src/berezin/_ckernels.pyx"],
        include_dirs=[gdir],
        libraries=libraries,
        extra_link_args=link_args,
        extra_compile_args=["-O3"],
        language="c++",
    )
    return cythonize([ext], compiler_directives={"language_level": "3"}, quiet=True)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
