"""Split a Gaussian through a nonlinear flow until every kernel looks linear.

    python demos/adaptive_mixture.py [eps_nu]
"""

import sys

import numpy as np

from uqprop.dynamics import integrate
from uqprop.gmm import AdaptConfig, Manifold, adaptive_propagate, mixture_moments


def drift(s, t):
    return [s[1], -s[0] - 0.3 * s[0] * s[0]]


def flow(x):
    return integrate(drift, x, 0.0, 2.0, 0.05)


eps = float(sys.argv[1]) if len(sys.argv) > 1 else 0.1
start = Manifold.single([1.0, 0.0], np.diag([0.02, 0.02]))
m_in, m_out = adaptive_propagate(start, flow, AdaptConfig(eps_nu=eps, n_max=4))
mean, cov = mixture_moments(m_out)

print(f"threshold {eps}: root index {m_out.info['root_nli'][0]:.3f}, {m_out.info['n_kernels']} kernels")
print("mixture mean", np.array2string(mean, precision=5))
print("mixture cov\n", np.array2string(cov, precision=5))
for k in sorted(m_out, key=lambda k: -k.weight)[:5]:
    print(f"  kernel {k.kid}: weight {k.weight:.4f}, index {k.nli:.3f}")
