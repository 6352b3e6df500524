"""
Suite de Tests - Pruebas unitarias e integración de OSP-TBA.
"""
