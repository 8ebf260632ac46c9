"""
Analysis helpers for packings: metrics, bounds, topology, rendering and audits.
"""
