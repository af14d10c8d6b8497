"""
Modelli Pydantic per l'applicazione
"""
