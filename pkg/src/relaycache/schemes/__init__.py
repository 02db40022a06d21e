"""Placement/delivery/decode pipelines for all supported schemes."""

from .broadcast import (
    PrefixCache,
    broadcast_decode,
    broadcast_mds_deliver,
    broadcast_place,
    prefix_bytes_for,
)
from .cmcnc import SubsetCache, cmcnc_decode, cmcnc_deliver, cmcnc_grid_t, cmcnc_place
from .common import (
    FileLibrary,
    GridError,
    IncompleteReceptionError,
    Record,
    SubpacketizationError,
    TransmissionLog,
    all_demands,
    distinct_demand,
    random_demand,
    random_library,
    uniform_demand,
    validate_demand,
)
from .proposed import (
    GroupedCache,
    proposed_decode,
    proposed_deliver,
    proposed_place,
    storage_grid_t,
)
from .routing import routing_decode, routing_deliver

__all__ = [
    "FileLibrary",
    "GridError",
    "GroupedCache",
    "IncompleteReceptionError",
    "PrefixCache",
    "Record",
    "SubpacketizationError",
    "SubsetCache",
    "TransmissionLog",
    "all_demands",
    "broadcast_decode",
    "broadcast_mds_deliver",
    "broadcast_place",
    "cmcnc_decode",
    "cmcnc_deliver",
    "cmcnc_grid_t",
    "cmcnc_place",
    "distinct_demand",
    "prefix_bytes_for",
    "proposed_decode",
    "proposed_deliver",
    "proposed_place",
    "random_demand",
    "random_library",
    "routing_decode",
    "routing_deliver",
    "storage_grid_t",
    "uniform_demand",
    "validate_demand",
]
