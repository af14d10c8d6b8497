"""
Utility condivise
"""
