"""
bntlgraph - Beta Neutral-to-the-Left models for sparse multigraphs
"""

__version__ = "0.4.0"
__author__ = "bntlgraph Contributors"
__description__ = "Sampling, Gibbs inference and maximum likelihood for BNTL graph models"
