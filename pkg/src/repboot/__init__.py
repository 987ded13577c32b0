"""Reputation bootstrapping for atomic and composite services."""

from .core import (CompositionSample, CompositionTopology, CycleDetected, DanglingEdge,
                   Disconnected, DomainError, IndicatorId, IndicatorSchema, IndicatorValue, Layer,
                   Pattern, ReputationLevel, ServiceRecord, TopologyError, quantize_level,
                   validate_topology)

__version__ = "0.1.0"
