"""Differential debug-information testing for compiler/debugger toolchains."""

__version__ = "0.1.0"
