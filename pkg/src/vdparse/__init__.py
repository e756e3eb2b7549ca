"""vdparse: video frame features -> linearized RST discourse structures.

Sequence-to-sequence learning over frame features with LSTM/GRU encoders and
Luong-style attention, the four structure/translation metrics, attention-mass
scene alignment, and a planted-code synthetic corpus for end-to-end checks.
"""

__version__ = "0.1.0"
