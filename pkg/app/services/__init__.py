"""
Servizi per addestramento, valutazione e simulazione
"""
