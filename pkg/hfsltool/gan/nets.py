'''Small fully connected networks with hand-written backprop and Adam.

Hidden layers use tanh; the last layer is linear and callers squash it with
`logistic` (losses work on the logits directly).

>>> rng = np.random.default_rng(0)
>>> net = MLP.build([4, 3, 1], rng, zero_last=True)
>>> float(logistic(net.forward(np.ones((1, 4)))[0])[0, 0])
0.5
'''
import typing as t

import attr
import numpy as np


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def glorot(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    lim = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-lim, lim, size=(n_in, n_out))


@attr.s(eq=False)
class MLP:
    weights: t.List[np.ndarray] = attr.ib()
    biases: t.List[np.ndarray] = attr.ib()

    @classmethod
    def build(cls, sizes: t.Sequence[int], rng: np.random.Generator,
              zero_last: bool = False) -> 'MLP':
        weights = [glorot(rng, a, b) for a, b in zip(sizes, sizes[1:])]
        if zero_last:
            weights[-1] = np.zeros_like(weights[-1])
        return cls(weights, [np.zeros(b) for b in sizes[1:]])

    @property
    def sizes(self) -> t.List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> t.List[np.ndarray]:
        '''W_0, b_0, W_1, b_1, ... (the arrays themselves, not copies).'''
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def forward(self, x: np.ndarray) -> t.Tuple[np.ndarray, t.List[np.ndarray]]:
        '''Output logits and the layer inputs needed by `backward`.'''
        h = np.atleast_2d(np.asarray(x, dtype=float))
        acts = [h]
        last = len(self.weights) - 1
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            a = h @ W + b
            if i == last:
                return a, acts
            h = np.tanh(a)
            acts.append(h)
        raise AssertionError('empty network')

    def backward(self, acts: t.List[np.ndarray], dlogit: np.ndarray
                 ) -> t.Tuple[t.List[np.ndarray], np.ndarray]:
        '''Gradients in `params` order, and the gradient w.r.t. the input.'''
        grads: t.List[np.ndarray] = []
        d = dlogit
        for i in reversed(range(len(self.weights))):
            grads[:0] = [acts[i].T @ d, d.sum(axis=0)]
            d = d @ self.weights[i].T
            if i:
                d = d * (1.0 - acts[i] ** 2)
        return grads, d


@attr.s(eq=False)
class Adam:
    lr: float = attr.ib(default=4e-4)
    beta1: float = attr.ib(default=0.9)
    beta2: float = attr.ib(default=0.999)
    eps: float = attr.ib(default=1e-8)
    m: t.List[np.ndarray] = attr.ib(factory=list)
    v: t.List[np.ndarray] = attr.ib(factory=list)
    steps: int = attr.ib(default=0)

    def step(self, params: t.List[np.ndarray], grads: t.List[np.ndarray]):
        '''Update `params` in place.'''
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.steps += 1
        c1 = 1 - self.beta1 ** self.steps
        c2 = 1 - self.beta2 ** self.steps
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
