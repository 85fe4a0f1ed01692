"""
funlora-lab: functional rank-1 LoRA adapters on a conditional flow-matching
generative model, trained class-incrementally
"""

__version__ = "1.0.0"
