__version__ = '0.1.0'

from pathlib import Path

from .scenario import (Scenario, ChannelDraws, InvalidScenario, builtin,
                       load_scenario, sample_channels)
from .cost import Infeasible, ObjectiveValue, SplitPlan, evaluate
from .moea import ParetoFront, hypervolume, nondominated_sort
from .moea import nsga3
from .gan import predgan
from . import convergence

here = Path(__file__).parent

__all__ = [
    'Scenario',
    'ChannelDraws',
    'InvalidScenario',
    'builtin',
    'load_scenario',
    'sample_channels',
    'Infeasible',
    'ObjectiveValue',
    'SplitPlan',
    'evaluate',
    'ParetoFront',
    'hypervolume',
    'nondominated_sort',
    'nsga3',
    'predgan',
    'convergence',
]
