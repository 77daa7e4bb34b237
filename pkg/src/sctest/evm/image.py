"""Preprocessed code arrays consumed by the frame interpreter kernels."""

from dataclasses import dataclass

from ..bytecode.decode import Instr, decode


@dataclass(frozen=True)
class CodeImage:
    code: bytes
    instrs: tuple[Instr, ...]
    imm: tuple  # push immediate (int) at push offsets, None elsewhere
    nxt: tuple[int, ...]  # offset of the next instruction, per offset
    is_jumpdest: bytes  # 1 at JUMPDEST offsets
    offsets: tuple[int, ...]  # instruction start offsets

    @property
    def n_instr(self) -> int:
        return len(self.offsets)

    @staticmethod
    def from_bytecode(code: bytes) -> "CodeImage":
        instrs = decode(code)
        n = len(code)
        imm: list = [None] * n
        nxt = [0] * n
        jd = bytearray(n)
        for ins in instrs:
            nxt[ins.offset] = ins.end
            if ins.imm_len:
                imm[ins.offset] = ins.imm
            if ins.code == 0x5B:
                jd[ins.offset] = 1
        return CodeImage(
            code,
            tuple(instrs),
            tuple(imm),
            tuple(nxt),
            bytes(jd),
            tuple(i.offset for i in instrs),
        )
