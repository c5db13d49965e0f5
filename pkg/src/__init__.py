"""Estimação de DOA por OMP em grade fixa para arranjos lineares uniformes."""

__version__ = "0.1.0"
