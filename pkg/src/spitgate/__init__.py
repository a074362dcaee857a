"""Offline two-layer VoIP spam (SPIT) detection over pcap captures."""

__version__ = "0.1.0"
