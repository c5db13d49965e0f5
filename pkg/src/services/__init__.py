"""Serviços de entrada e saída: arquivos de experimento e resultados."""
