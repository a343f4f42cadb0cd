"""
Command-line entry points for impeq.
"""
