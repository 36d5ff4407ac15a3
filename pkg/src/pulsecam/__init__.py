"""pulsecam: camera-based pulse waveform extraction.

Extracts a photoplethysmogram-like waveform from a single-channel frame
sequence by tracking planar skin regions, averaging small blocks inside
them, and combining the per-block traces with signal-quality weights.
Includes a synthetic scene renderer that provides ground truth for tests.
"""

__version__ = "0.1.0"
