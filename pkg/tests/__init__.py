"""
Test suite for impeq.
"""
