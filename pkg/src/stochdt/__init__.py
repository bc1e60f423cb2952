"""Stochastic distance transforms for noisy binary images."""
from ._accel import numba_enabled, set_threads, use_numba
from .edt import edt, knn_distance_maps, saturated_edt
from .imaging import BinaryImage, GrayImage, ImageFormatError, read_binary, read_image
from .matching import MatchField, MinimaReport, analyze_minima, match_template, smd_distance
from .sdt import (BACKENDS, RandomSetModel, SdtParams, det_sdt, distance_map, exact_sdt_oracle, kappa,
                  mc_sdt, sample_realization)
from .watershed import SegmentationResult, extract_seeds, segment, watershed_segment

__version__ = "0.1.0"

__all__ = [
    "BACKENDS", "BinaryImage", "GrayImage", "ImageFormatError", "MatchField", "MinimaReport",
    "RandomSetModel", "SdtParams", "SegmentationResult", "analyze_minima", "det_sdt", "distance_map",
    "edt", "exact_sdt_oracle", "extract_seeds", "kappa", "knn_distance_maps", "match_template",
    "mc_sdt", "numba_enabled", "read_binary", "read_image", "sample_realization", "saturated_edt",
    "segment", "set_threads", "smd_distance", "use_numba", "watershed_segment",
]
