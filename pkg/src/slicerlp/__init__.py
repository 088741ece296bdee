"""Network slicing via LP dynamic rounding and refinement."""

__version__ = "0.1.0"
