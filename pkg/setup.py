"""Build script for the optional compiled kernels.

The package works without the extension; if Cython or a C compiler is
unavailable the build falls back to pure Python and the import-time
backend selection in sctest._kernels picks it up.
"""

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build extensions best-effort: failures degrade to pure Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: compiled kernels skipped ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: extension {ext.name} skipped ({exc})")


def extensions():
    import os

    if not os.path.exists("src/sctest/_kernels/_speedups.pyx"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "sctest._kernels._speedups",
                ["src/sctest/_kernels/_speedups.pyx"],
            )
        ],
        language_level=3,
    )


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
