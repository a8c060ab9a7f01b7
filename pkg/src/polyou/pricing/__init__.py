"""Option, volatility-swap and quadrature routines."""
