"""
Adam optimizer over a dictionary of named parameter arrays.
"""

import numpy as _np


class Adam:
    """
    Adaptive moment estimation with bias-corrected first and second moment
    estimates kept per parameter name. Parameters are updated in place.
    """

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if not learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}.")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError(f"Adam betas must lie in [0, 1), got {beta1}, {beta2}.")
        if not epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}.")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = {}
        self.v = {}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        step_size = self.learning_rate / correction1
        for name, param in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = _np.zeros_like(param)
                self.v[name] = _np.zeros_like(param)
            self.m[name] *= self.beta1
            self.m[name] += (1.0 - self.beta1) * g
            self.v[name] *= self.beta2
            self.v[name] += (1.0 - self.beta2) * (g * g)
            denominator = _np.sqrt(self.v[name] / correction2) + self.epsilon
            param -= step_size * self.m[name] / denominator
