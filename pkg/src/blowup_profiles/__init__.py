"""Self-similar blow-up profiles for u_t = (u^m)_xx + |x|^sigma u."""

from .model import Params, exponents, sigma_star

__version__ = "0.1.0"

__all__ = ["Params", "exponents", "sigma_star", "__version__"]
