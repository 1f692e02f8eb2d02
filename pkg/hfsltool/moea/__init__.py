from .genotype import decode, encode, fl_genotype
from .nsga3 import GeneticConfig
from .operators import genetic_offspring, poly_mutation, sbx_crossover
from .pareto import (Dominance, ParetoFront, dominates, hypervolume,
                     nondominated_sort)
from .population import Individual, Population, Problem, RunResult, stream
from .selection import niching_select, reference_rays, select

__all__ = [
    'decode', 'encode', 'fl_genotype', 'GeneticConfig', 'genetic_offspring',
    'poly_mutation', 'sbx_crossover', 'Dominance', 'ParetoFront', 'dominates',
    'hypervolume', 'nondominated_sort', 'Individual', 'Population', 'Problem',
    'RunResult', 'stream', 'niching_select', 'reference_rays', 'select',
]
