"""
Treinamento do AttDet: perda BCE, backprop manual, Adam e verificação de gradientes.
"""
