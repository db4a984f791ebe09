"""maninforge: exact Hecke algebra and deg/cong diagnostics for J_0(n)."""

__version__ = "0.1.0"
