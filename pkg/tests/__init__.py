"""
Hadaptive - Test Suite
"""
