"""Design and benchmark families of binary spreading codes.

Core pieces: the sequence/family types, periodic correlation metrics and the
max(mean-square auto, mean-square cross) objective, classical Gold and Weil
generators, a Gaussian search-distribution trainer driven by a small
generative network, an elitist GA baseline, and an experiment harness.
"""

__version__ = "0.1.0"

from .bitseq import BitSequence, CodeFamily, from_signed, load_family, save_family, to_signed
from .correlation import (
    CorrelationSpectrum,
    ObjectiveReport,
    auto_corr,
    cross_corr,
    evaluate_family,
    full_auto_spectrum,
    full_cross_spectrum,
    odd_auto_corr,
    odd_cross_corr,
    welch_bound,
)
from .classical import (
    GoldFamilySpec,
    LfsrSpec,
    WeilFamilySpec,
    best_of_samples,
    gold_family,
    gold_spec_for_degree,
    legendre_sequence,
    lfsr_sequence,
    sample_subset,
    weil_family,
)
from .network import NetworkConfig, ProposalParams, init_network
from .nes import NesConfig, TrainResult, train
from .ga import GaConfig, GaResult, ga_run

__all__ = [
    "__version__",
    "BitSequence",
    "CodeFamily",
    "to_signed",
    "from_signed",
    "save_family",
    "load_family",
    "CorrelationSpectrum",
    "ObjectiveReport",
    "auto_corr",
    "cross_corr",
    "odd_auto_corr",
    "odd_cross_corr",
    "full_auto_spectrum",
    "full_cross_spectrum",
    "evaluate_family",
    "welch_bound",
    "LfsrSpec",
    "GoldFamilySpec",
    "WeilFamilySpec",
    "lfsr_sequence",
    "gold_family",
    "gold_spec_for_degree",
    "legendre_sequence",
    "weil_family",
    "sample_subset",
    "best_of_samples",
    "NetworkConfig",
    "ProposalParams",
    "init_network",
    "NesConfig",
    "TrainResult",
    "train",
    "GaConfig",
    "GaResult",
    "ga_run",
]
