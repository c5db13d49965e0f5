"""Hierarquia de erros do pacote de estimação de DOA."""
from typing import Optional


class DoaError(Exception):
    """Erro base do projeto."""


class DomainError(DoaError, ValueError):
    """Parâmetro fora do domínio permitido (ângulo, posto, número de fontes...)."""


class DimensionError(DoaError, ValueError):
    """Dimensões incompatíveis entre matrizes/vetores."""


class KindError(DoaError, ValueError):
    """Tipo de matriz de medição inválido para os parâmetros informados."""


class IdentifiabilityError(DoaError, ValueError):
    """Cenário com fontes demais para o arranjo (M >= N)."""


class InfeasibleError(DoaError, ValueError):
    """Problema de recuperação sem solução possível (esparsidade > m)."""


class RefusalError(DoaError, RuntimeError):
    """Busca exaustiva recusada por exceder o orçamento combinatório."""


class NumericalError(DoaError, ArithmeticError):
    """Falha numérica (matriz singular, mal condicionada, autodecomposição)."""


class InvariantViolation(DoaError, AssertionError):
    """Invariante interno violado."""


class ConfigError(DoaError, ValueError):
    """Erro no arquivo de experimento, ancorado na linha da chave quando possível."""

    def __init__(self, message: str, *, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = f"linha {line}: " if line is not None else ""
        super().__init__(prefix + message)
