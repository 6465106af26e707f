"""Set-consensus power of object collections, and protocols that reach it."""

from .calculus import (
    AgreementTable,
    Collection,
    CollectionError,
    ObjectSpec,
    Witness,
    agreement_table,
    al,
    brute_force_al,
    complete,
    normalize,
    parse_collection,
    scn,
    solvable,
    witness,
)

__all__ = [
    "AgreementTable",
    "Collection",
    "CollectionError",
    "ObjectSpec",
    "Witness",
    "agreement_table",
    "al",
    "brute_force_al",
    "complete",
    "normalize",
    "parse_collection",
    "scn",
    "solvable",
    "witness",
]

__version__ = "0.1.0"
