"""Builds the pybind11 extension through CMake.

setuptools drives the Python packaging; the C++ core and the `_core`
extension are compiled by the project's CMake build with tests and the
CLI disabled.
"""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        # The extension must land next to the pure-python package files.
        out_dir = Path(self.get_ext_fullpath(ext.name)).resolve().parent

        import pybind11

        subprocess.run(
            [
                "cmake",
                str(source_dir),
                "-DXATK_BUILD_TESTS=OFF",
                "-DXATK_BUILD_CLI=OFF",
                "-DXATK_BUILD_PYTHON=ON",
                f"-DCMAKE_BUILD_TYPE={'Debug' if self.debug else 'Release'}",
                f"-Dpybind11_DIR={pybind11.get_cmake_dir()}",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            cwd=build_dir,
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_core",
             f"-j{os.cpu_count() or 2}"],
            cwd=build_dir,
            check=True,
        )

        built = next((build_dir / "python" / "xatk").glob("_core.*"))
        out_dir.mkdir(parents=True, exist_ok=True)
        self.copy_file(str(built), str(out_dir / built.name))


setup(
    ext_modules=[CMakeExtension("xatk._core")],
    cmdclass={"build_ext": CMakeBuild},
)
