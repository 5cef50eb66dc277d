"""
Detector AttDet: parâmetros, forward com cache, checkpoint e adaptador `Detector`.
"""
