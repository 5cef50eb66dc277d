"""
Geradores aleatórios nomeados, semeáveis e divisíveis.

Cada fluxo é identificado por uma semente e uma tupla de chaves inteiras (por exemplo,
``(seed, snr_index, chunk_index)``); a mesma identificação reproduz exatamente o mesmo fluxo,
independentemente de quantos workers existam.
"""

import numpy as np

from attdetengine.exceptions import ConfigError

BIT_GENERATORS = {
    "philox": np.random.Philox,
    "pcg64": np.random.PCG64,
}
DEFAULT_GENERATOR = "philox"


def make_rng(seed: int, *keys: int, name: str = DEFAULT_GENERATOR) -> np.random.Generator:
    """
    Cria o gerador do fluxo ``(seed, *keys)``.

    Parameters
    ----------
    seed : int
        Semente do experimento.
    *keys : int
        Índices que identificam o subfluxo (worker, ponto de SNR, bloco...).
    name : str, optional
        ``"philox"`` (baseado em contador, padrão) ou ``"pcg64"``.

    Returns
    -------
    np.random.Generator
        Gerador independente para o subfluxo.

    Raises
    ------
    ConfigError
        Se `name` não for um gerador conhecido.

    Examples
    --------
    >>> a = make_rng(7, 1, 2).standard_normal(3)
    >>> b = make_rng(7, 1, 2).standard_normal(3)
    >>> bool(np.array_equal(a, b))
    True
    """
    try:
        bit_generator = BIT_GENERATORS[name]
    except KeyError as e:
        raise ConfigError(f"Unknown RNG '{name}'; choose one of {sorted(BIT_GENERATORS)}.") from e
    entropy = [int(seed), *(int(k) for k in keys)]
    return np.random.Generator(bit_generator(np.random.SeedSequence(entropy)))
