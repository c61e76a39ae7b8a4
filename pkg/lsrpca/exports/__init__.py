"""
Report writers for comparison sweeps: CSV, JSON, curve tables and XLSX workbooks.
"""
