"""Experimentos embarcados: simulation1 … simulation4 (N=15, d=λ/2, grade de 181 pontos)."""
