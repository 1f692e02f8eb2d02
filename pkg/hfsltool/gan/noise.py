'''Gaussian input noise for the generator, fitted to a population.'''
import logging

import attr
import numpy as np

log = logging.getLogger(__name__)

JITTER = 1e-6


def factorize(cov: np.ndarray, jitter: float = JITTER) -> np.ndarray:
    '''Lower factor C with C C^T ~= cov.

    Falls back to the diagonal when the jittered matrix still is not
    positive definite.
    '''
    d = len(cov)
    try:
        return np.linalg.cholesky(cov + jitter * np.eye(d))
    except np.linalg.LinAlgError:
        log.warning('covariance not positive definite after jitter, '
                    'sampling from its diagonal')
        return np.diag(np.sqrt(np.maximum(np.diag(cov), 0.0) + jitter))


@attr.s(eq=False)
class NoiseModel:
    mean: np.ndarray = attr.ib()
    cov: np.ndarray = attr.ib()
    factor: np.ndarray = attr.ib()

    @classmethod
    def fit(cls, X: np.ndarray) -> 'NoiseModel':
        '''Mean and (population) covariance of the rows of X.'''
        X = np.atleast_2d(np.asarray(X, dtype=float))
        cov = np.atleast_2d(np.cov(X, rowvar=False, bias=True))
        return cls(X.mean(axis=0), cov, factorize(cov))

    def with_mean(self, mean: np.ndarray) -> 'NoiseModel':
        return attr.evolve(self, mean=np.asarray(mean, dtype=float))

    @property
    def dim(self) -> int:
        return len(self.mean)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        z = rng.standard_normal((count, self.dim))
        return self.mean + z @ self.factor.T
