"""Writes golden.fb, a tiny FEATBANK file, with nothing but the stdlib.

Layout: magic, u16 version, u16 flags, u32 class_count, u32 dim, then per
class in ascending id a train block and a test block (u32 id, u8 tag,
u32 rows, rows*dim f32), then a CRC32 of every preceding byte. All
little-endian.
"""

import pathlib
import struct
import zlib

DIM = 4
# class id -> (train rows, test rows)
CLASSES = {0: (3, 1), 2: (2, 2), 7: (1, 1)}


def value(class_id, tag, row, col):
    # exact in f32: multiples of 1/8 with a sign pattern
    v = class_id * 10 + tag * 5 + row + col / 8.0
    return -v if (row + col) % 2 else v


def main():
    out = bytearray(b"FEATBANK")
    out += struct.pack("<HHII", 1, 0, len(CLASSES), DIM)
    for cid in sorted(CLASSES):
        for tag, rows in enumerate(CLASSES[cid]):
            out += struct.pack("<IBI", cid, tag, rows)
            for r in range(rows):
                out += struct.pack("<%df" % DIM, *(value(cid, tag, r, c) for c in range(DIM)))
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    path = pathlib.Path(__file__).with_name("golden.fb")
    path.write_bytes(bytes(out))
    print(path, len(out), "bytes")


if __name__ == "__main__":
    main()
