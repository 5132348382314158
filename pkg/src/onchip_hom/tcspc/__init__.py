"""Detector simulation, time-tag files and coincidence analysis."""

from .correlate import CoincidenceResult, Histogram, correlation_histogram, count_coincidences
from .detection import DetectorConfig, apply_dead_time, detect_channel, simulate_detection, sorted_uniform
from .tagfile import TagStream, decode_tags, encode_tags, export_csv, read_tags, write_tags
