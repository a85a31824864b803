import struct
from dataclasses import dataclass, field

from ..errors import ImageTooLarge


@dataclass
class KernelImage:
    """Flat kernel: little-endian 32-bit words, no header."""

    words: list = field(default_factory=list)
    entry: int = 0

    def __len__(self):
        return 4 * len(self.words)

    def to_bytes(self):
        return struct.pack(f"<{len(self.words)}I", *self.words)

    @classmethod
    def from_bytes(cls, data, entry=0):
        if len(data) % 4:
            raise ValueError(f"image length {len(data)} is not a multiple of 4")
        return cls(words=list(struct.unpack(f"<{len(data) // 4}I", data)), entry=entry)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    def check_fits(self, iram_bytes):
        if len(self) > iram_bytes:
            raise ImageTooLarge(f"image is {len(self)} bytes; IRAM holds {iram_bytes}")
