"""Desk-scale simulator and analytic models for inter-FPGA communication."""

__version__ = "0.1.0"
