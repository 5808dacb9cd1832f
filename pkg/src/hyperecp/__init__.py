"""Simulation of polarization/spatial hyperentanglement concentration with linear optics.

Photonic states are sparse polynomials in creation operators over
(path, polarization, time-bin) modes. Optical elements act as linear mode
maps, detection groups Fock patterns into non-number-resolving click
records, and the protocol layer classifies each record as success,
recycle or fail.
"""

from .analysis import analytic_probs, compare, p1, recycle_probability, success_with_recycling, sweep
from .detection import (
    BELL,
    GHZ,
    ClassificationError,
    ProtocolRun,
    SignatureTable,
    derive_signature_table,
    find_detector_bijection,
    run_protocol,
    signature_table,
)
from .fock import Mode, ModeMap, NonUnitaryError, State, apply_mode_map, fidelity, inner_product, tensor
from .optics import BS, HWP, PBS, PS, Circuit, ConditionalDelay, PathSwap, apply_circuit, parse_circuit
from .protocol import Reference, SourceParams, bell_input, build_bell_circuit, build_ghz_circuit, ghz_input

__version__ = "0.1.0"
