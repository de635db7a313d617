"""Over-the-air majority-vote aggregation with FSK over OFDM.

Link-level simulation of federated signSGD where edge devices signal gradient
signs by activating one of two subcarriers and the edge server detects the
majority vote with an energy detector.
"""

from fskmv.geometry import CellConfig, ed_link_distances, lambda_param, received_power, sample_link_distance
from fskmv.waveform import OfdmConfig, ofdm_demodulate, ofdm_modulate, pmepr
from fskmv.channel import EPA, ChannelRealization, TapProfile, freq_response, realize_channel, superpose_at_es
from fskmv.oac import (
    ResourceMap,
    build_fsk_map,
    fskmv_detect,
    fskmv_encode,
    ideal_mv,
    obda_detect,
    obda_encode,
)

__version__ = "0.1.0"

__all__ = [
    "CellConfig",
    "ed_link_distances",
    "lambda_param",
    "received_power",
    "sample_link_distance",
    "OfdmConfig",
    "ofdm_modulate",
    "ofdm_demodulate",
    "pmepr",
    "EPA",
    "TapProfile",
    "ChannelRealization",
    "realize_channel",
    "freq_response",
    "superpose_at_es",
    "ResourceMap",
    "build_fsk_map",
    "fskmv_encode",
    "fskmv_detect",
    "obda_encode",
    "obda_detect",
    "ideal_mv",
]
