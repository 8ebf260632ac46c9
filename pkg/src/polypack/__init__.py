"""
Polygon disk packing package
"""
