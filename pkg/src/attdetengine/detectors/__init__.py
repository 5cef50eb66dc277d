"""
Detectores clássicos (ZF, MMSE, filtro casado, ML, K-best) e o registro de rótulos.
"""
