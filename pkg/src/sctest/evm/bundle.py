"""Contract bundle loading: bytecode + ABI manifest + optional source,
linemap, and genesis config."""

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from ..bytecode.abi import FunctionSig, parse_abi
from ..bytecode.cfg import Cfg, build_cfg, resolve_entries
from ..errors import SchemaError
from .image import CodeImage
from .types import parse_addr


@dataclass
class ContractBundle:
    name: str
    bytecode: bytes
    abi: list[FunctionSig]
    source: str | None = None
    linemap: dict[int, int] | None = None
    world_config: dict | None = None

    @cached_property
    def image(self) -> CodeImage:
        return CodeImage.from_bytecode(self.bytecode)

    @cached_property
    def cfg(self) -> Cfg:
        return build_cfg(self.bytecode, self.abi)

    @cached_property
    def resolved_abi(self) -> list[FunctionSig]:
        """ABI with entry offsets and body ranges filled in."""
        return resolve_entries(self.cfg, self.abi)

    @cached_property
    def by_name(self) -> dict[str, FunctionSig]:
        return {s.name: s for s in self.resolved_abi}

    @cached_property
    def by_selector(self) -> dict[bytes, FunctionSig]:
        return {s.selector: s for s in self.resolved_abi}

    @property
    def fallback_entry(self) -> int | None:
        sig = self.by_name.get("fallback")
        return sig.entry_offset if sig else None


def load_bundle(path: str | Path) -> ContractBundle:
    """Load a bundle directory: contract.hex + abi.json
    (+ source.sol, linemap.json, world.json)."""
    p = Path(path)
    hex_text = (p / "contract.hex").read_text().strip()
    if hex_text.startswith(("0x", "0X")):
        hex_text = hex_text[2:]
    bytecode = bytes.fromhex("".join(hex_text.split()))

    try:
        manifest = json.loads((p / "abi.json").read_text())
    except json.JSONDecodeError as e:
        raise SchemaError("$", f"abi.json is not valid JSON: {e}") from None
    abi = parse_abi(manifest)

    source = None
    src_path = p / "source.sol"
    if src_path.exists():
        source = src_path.read_text()

    linemap = None
    lm_path = p / "linemap.json"
    if lm_path.exists():
        raw = json.loads(lm_path.read_text())
        linemap = {int(k): int(v) for k, v in raw.items()}

    world_config = None
    wc_path = p / "world.json"
    if wc_path.exists():
        world_config = json.loads(wc_path.read_text())

    return ContractBundle(p.name, bytecode, abi, source, linemap, world_config)


DEFAULT_ACCOUNTS = [(0x1001, 10**18), (0x1002, 10**18)]
DEFAULT_DEPLOY_AT = 0xC0DE


def genesis_config(bundle: ContractBundle) -> dict:
    """Normalized genesis parameters for a bundle (world.json or defaults)."""
    cfg = bundle.world_config or {}
    accounts = [
        (parse_addr(a["address"]), int(a["balance"]))
        for a in cfg.get("accounts", [])
    ] or list(DEFAULT_ACCOUNTS)
    deploy_at = parse_addr(cfg.get("deploy_at", DEFAULT_DEPLOY_AT))
    out = {"accounts": accounts, "deploy_at": deploy_at}
    if "timestamp" in cfg:
        out["timestamp"] = int(cfg["timestamp"])
    if "number" in cfg:
        out["number"] = int(cfg["number"])
    return out
