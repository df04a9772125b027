"""Blind, task-agnostic valuation of graph datasets between a buyer and sellers."""

__version__ = "0.1.0"
