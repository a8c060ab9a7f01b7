"""Pricing and calibration engine for polynomial OU stochastic volatility models."""
