"""
Utility modules for bntlgraph
"""
