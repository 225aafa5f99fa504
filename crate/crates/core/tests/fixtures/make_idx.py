"""Writes a tiny IDX image/label pair used by the parser tests.

Three 2x2 images with known pixels and digit labels 3, 7, 4.
"""
import struct

IMAGES = [
    [0, 255, 128, 64],
    [1, 2, 3, 4],
    [255, 255, 0, 0],
]
LABELS = [3, 7, 4]

with open("tiny-images.idx", "wb") as f:
    f.write(struct.pack(">IIII", 0x00000803, len(IMAGES), 2, 2))
    for img in IMAGES:
        f.write(bytes(img))

with open("tiny-labels.idx", "wb") as f:
    f.write(struct.pack(">II", 0x00000801, len(LABELS)))
    f.write(bytes(LABELS))
