"""Streaming speech-processing runtime and simulator.

A serving loop (sliding-window buffering, two-round agreement confirmation,
reference-guided beam pruning, hush-word input policy, dual-executor pipeline
simulation) over a deterministic scripted model backend, so every algorithmic
behavior is testable without model weights.
"""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
