"""Scale-aware Siamese tracking with pairwise scale-channel attention, plus an
evaluation harness and a synthetic sequence generator."""
from .bbox import BBox
from .config import TrackerConfig
from .tracker import SiamSATracker, StaticTracker
from .weights import NetworkWeights, load_weights, save_weights

__version__ = "0.1.0"
