from .asm import (Assembler, assemble, disassemble, encode, format_instr, listing,
                  parse_instruction)
from .image import KernelImage
from .loader import image_blocks, multicast_load, unicast_load

__all__ = ["Assembler", "KernelImage", "assemble", "disassemble", "encode",
           "format_instr", "image_blocks", "listing", "multicast_load", "parse_instruction",
           "unicast_load"]
