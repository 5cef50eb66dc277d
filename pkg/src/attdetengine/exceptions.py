class AttDetError(Exception):
    """
    Erro base do laboratório de detecção MIMO.

    Toda falha prevista pela biblioteca (dimensões incompatíveis, matrizes singulares,
    configurações inválidas, checkpoints corrompidos) é sinalizada por uma subclasse desta
    exceção, permitindo que a CLI e o harness tratem os erros de forma uniforme.

    Parameters
    ----------
    message : str
        Explicação detalhada do erro ocorrido.

    Examples
    --------
    >>> issubclass(RankDeficient, AttDetError)
    True
    """


class DimensionMismatch(AttDetError):
    """Dimensões de operandos incompatíveis."""


class NotPositiveDefinite(AttDetError):
    """Pivô de Cholesky não positivo (matriz não é Hermitiana positiva definida)."""


class RankDeficient(NotPositiveDefinite):
    """Matriz de canal sem posto coluna completo."""


class UnsupportedOrder(AttDetError):
    """Ordem de modulação não suportada."""


class LengthMismatch(AttDetError):
    """Comprimento da sequência de bits não é múltiplo de bits por símbolo."""


class SearchSpaceTooLarge(AttDetError):
    """Espaço de busca exaustiva acima do limite de enumeração."""


class DegenerateColumn(AttDetError):
    """Coluna do canal estimado com norma (quase) nula."""


class EmptyMask(AttDetError):
    """Nenhum bit ativo na máscara da função de perda."""


class DivergenceDetected(AttDetError):
    """Treinamento divergiu (perda NaN ou persistentemente explosiva)."""


class CheckpointMismatch(AttDetError):
    """Checkpoint incompatível, corrompido ou de versão desconhecida."""


class ConfigError(AttDetError):
    """Arquivo de configuração ausente ou inválido."""


class GateFailure(AttDetError):
    """Critério de aceitação numérico não atingido."""
