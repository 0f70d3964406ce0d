"""Self-configuring password models from community auxiliary data."""

from .attention import ConfigSeed, DpSeedParams
from .dims import ModelDims, tiny_dims
from .leaks import Account, CredentialLeak, LeakCollection
from .model import Uncm, build_uncm, compute_seed
from .passmodel import CharVocab, SeededModel, UnsupportedPassword

__all__ = [
    "Account",
    "CharVocab",
    "ConfigSeed",
    "CredentialLeak",
    "DpSeedParams",
    "LeakCollection",
    "ModelDims",
    "SeededModel",
    "Uncm",
    "UnsupportedPassword",
    "build_uncm",
    "compute_seed",
    "tiny_dims",
]
