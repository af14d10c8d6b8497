"""
Configurazioni dell'applicazione
"""
