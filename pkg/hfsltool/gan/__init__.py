from .nets import MLP, Adam, logistic
from .noise import NoiseModel
from .pairs import DominancePairSet, find_pairs
from .predgan import GanConfig, PredGAN, load_checkpoint, save_checkpoint

__all__ = [
    'MLP', 'Adam', 'logistic', 'NoiseModel', 'DominancePairSet', 'find_pairs',
    'GanConfig', 'PredGAN', 'load_checkpoint', 'save_checkpoint',
]
