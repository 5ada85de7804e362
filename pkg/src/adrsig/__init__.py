"""Adverse drug reaction signal detection from before/after exposure feature matrices."""
from adrsig.errors import AdrError
from adrsig.kernels import BACKEND
from adrsig.readcode import CodeDictionary, ReadCode, parse_readcode, truncate_to_level

__version__ = "0.1.0"

__all__ = ["AdrError", "BACKEND", "CodeDictionary", "ReadCode", "parse_readcode", "truncate_to_level"]
