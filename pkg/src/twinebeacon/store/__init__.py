"""Content-addressed beacon store and its HTTP gateway."""
from .client import GatewayClient
from .config import load_config, parse_listen
from .gateway import Gateway
from .store import BeaconStore, ChainHead, StoreRecord

__all__ = ["BeaconStore", "ChainHead", "Gateway", "GatewayClient", "StoreRecord", "load_config", "parse_listen"]
