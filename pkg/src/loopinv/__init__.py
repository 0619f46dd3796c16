"""Feedback-guided loop invariant synthesis.

Propose invariants with one LLM, discharge the Hoare verification
conditions with an SMT solver, formally check the model's own proof
when verification fails, and feed the located reasoning errors back
for refinement.
"""

__version__ = "0.1.0"
