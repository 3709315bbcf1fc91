"""robustkd: noise-invariant teacher-student distillation for small speech encoders."""

__version__ = "0.1.0"
