"""
Headline Preference Lab - modelli di preferenza per titoli di notizie e simulazione bandit
"""

__version__ = "0.1.0"
