"""Zero-inflated negative binomial regression with NNGP spatial and temporal effects."""

from .model import ChainState, CsvSchema, PanelDataset, PriorSpec, ingest_csv
from .gibbs import ChainConfig, ZinbSampler, run_chain
from .samples import PosteriorSamples
from .simulate import SimDesign, preset_design, simulate_dataset

__version__ = "0.1.0"

__all__ = [
    "ChainConfig", "ChainState", "CsvSchema", "PanelDataset", "PosteriorSamples", "PriorSpec",
    "SimDesign", "ZinbSampler", "ingest_csv", "preset_design", "run_chain", "simulate_dataset",
]
