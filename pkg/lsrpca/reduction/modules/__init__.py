"""
Framework-free numerical code: storage, sketching, factorizations and evaluation.
"""
