"""
cosmos - Context-sensitive configuration engine for smartphones
"""

__version__ = "1.0.0"
