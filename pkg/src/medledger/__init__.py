"""medledger: permissioned multi-party, multi-ledger supply-chain engine."""

from .engine import EngineConfig, SupplyChainEngine

__all__ = ["EngineConfig", "SupplyChainEngine"]
__version__ = "0.1.0"
