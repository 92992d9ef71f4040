"""Sending-or-not-sending twin-field QKD toolkit."""

from .params import ChannelParams, ProtocolParams

__version__ = "0.1.0"

__all__ = ["ChannelParams", "ProtocolParams", "__version__"]
