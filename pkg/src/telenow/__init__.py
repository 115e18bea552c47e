"""Nowcasting regional teleworking shares by sex and age from mobility data."""

__version__ = "0.1.0"
