"""Exception hierarchy shared by the simulator, assembler and CLI."""


class PhalanxError(Exception):
    """Base class; ``kind`` is the machine-readable error name."""

    @property
    def kind(self):
        return type(self).__name__


class IllegalInstruction(PhalanxError):
    def __init__(self, word, pc=None):
        self.word = word & 0xFFFFFFFF
        self.pc = pc
        where = f" at pc=0x{pc:08x}" if pc is not None else ""
        super().__init__(f"illegal instruction 0x{self.word:08x}{where}")


class MisalignedAccess(PhalanxError):
    def __init__(self, address, width, pc=None):
        self.address = address
        self.width = width
        self.pc = pc
        super().__init__(f"misaligned {width}-byte access to 0x{address:08x}")


class MisalignedFetch(PhalanxError):
    def __init__(self, target, pc=None):
        self.target = target
        self.pc = pc
        super().__init__(f"misaligned fetch target 0x{target:08x}")


class UnmappedAddress(PhalanxError):
    def __init__(self, address, pc=None):
        self.address = address
        self.pc = pc
        super().__init__(f"unmapped address 0x{address:08x}")


class InvalidDestination(PhalanxError):
    pass


class InvalidBlock(PhalanxError):
    pass


class InvalidConfig(PhalanxError):
    pass


class WatchdogExpired(PhalanxError):
    def __init__(self, cycles, metrics=None):
        self.cycles = cycles
        self.metrics = metrics
        super().__init__(f"watchdog expired after {cycles} cycles")


class ConservationError(PhalanxError):
    pass


class ImageTooLarge(PhalanxError):
    pass


class AssemblerError(PhalanxError):
    """Assembler diagnostic carrying the 1-based source line number."""

    def __init__(self, message, line=None):
        self.message = message
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class UnknownMnemonic(AssemblerError):
    pass


class UndefinedLabel(AssemblerError):
    pass


class ImmediateOutOfRange(AssemblerError):
    pass


class MisalignedTarget(AssemblerError):
    pass


class FileNotFound(PhalanxError):
    pass


class UsageError(PhalanxError):
    pass
