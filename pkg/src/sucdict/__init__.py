"""Succinct static dictionary with constant-probe queries."""
from .dictionary import DictParams, Dictionary
from .errors import (BuildFailed, ParamViolation, RetriesExhausted, Singular, SucdError)
from .field import BinaryField, PrimeField, next_prime
from .retrieval import AugmentedRetrieval, RetrievalParams
from .blocktree import BlockTree, BlockTreeParams
from .encoding import ConversionTree, convert

__all__ = [
    "DictParams", "Dictionary", "BuildFailed", "ParamViolation", "RetriesExhausted", "Singular",
    "SucdError", "BinaryField", "PrimeField", "next_prime", "AugmentedRetrieval", "RetrievalParams",
    "BlockTree", "BlockTreeParams", "ConversionTree", "convert",
]
__version__ = "0.1.0"
