"""Dynamic topic-discourse memory network for pairwise persuasiveness prediction.

The package builds paired argumentation corpora from threaded debates,
learns per-turn topic and discourse factors with a variational encoder,
tracks them in a gated dynamic memory, and scores which of two matched
conversations is the more persuasive one.
"""

__version__ = "0.1.0"
