#!/usr/bin/env python3
"""How long token sequences become overlapping windows.

A 500-token window with 50 overlapping tokens steps 450 tokens at a time;
the encoder-facing plan keeps at most four windows, the summarizer-facing
plan uses 1000-token windows and keeps everything.
"""

from multirep import ChunkPlan, chunk, chunk_for_summarizer

tokens = list(range(1700))

print("Encoder plan: window=500, overlap=50, at most 4 windows")
windows = chunk(tokens, ChunkPlan(window=500, overlap=50, max_chunks=4))
for offset, piece in windows:
    print(f"  offset {offset:5d}  length {len(piece):4d}  "
          f"tokens {piece[0]}..{piece[-1]}")

# consecutive windows share exactly the overlap
first, second = windows.chunks[0], windows.chunks[1]
print("shared tokens between window 0 and 1:", first[-50:] == second[:50])

print("\nSummarizer plan: window=1000, overlap=50, uncapped")
for offset, piece in chunk_for_summarizer(tokens):
    print(f"  offset {offset:5d}  length {len(piece):4d}")

# a short final window is kept, never padded or dropped
print("\nA 1-token input still yields one window:",
      chunk([42], ChunkPlan()).chunks)
