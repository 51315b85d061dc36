"""Inside the learning core: gradient checking and exploration noise.

Everything the agent trains with is hand-rolled numpy, so its gradients can
be audited directly against central finite differences, and the exploration
process against its analytic stationary moments.
"""

import numpy as np

from steerlab.ddpg import (OuNoise, actor_loss_and_grads, critic_loss_and_grads,
                           init_mlp)

rng = np.random.default_rng(0)

# Small nets keep the finite-difference audit fast.
actor = init_mlp([4, 8, 8, 1], rng, out_act="tanh", out_scale=1.0)
critic = init_mlp([5, 8, 8, 1], rng)
s = rng.normal(size=(16, 4))
a = rng.uniform(-1, 1, size=(16, 1))
y = rng.normal(size=16)


def finite_difference(loss_fn, net, eps=1e-5):
    out = []
    for p in net.parameters:
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss_fn()
            flat[i] = keep - eps
            gflat[i] = (up - loss_fn()) / (2 * eps)
            flat[i] = keep
        out.append(g)
    return out


def worst_gap(analytic, numeric):
    worst = 0.0
    for g_a, g_n in zip(analytic, numeric):
        mask = np.abs(g_a) > 1e-8
        if mask.any():
            worst = max(worst, float(np.max(np.abs(g_a[mask] - g_n[mask])
                                            / np.abs(g_a[mask]))))
    return worst


loss, grads = critic_loss_and_grads(critic, s, a, y)
numeric = finite_difference(lambda: critic_loss_and_grads(critic, s, a, y)[0],
                            critic)
print(f"critic: loss {loss:.4f}, worst gradient gap "
      f"{worst_gap(grads, numeric):.2e} relative")

loss, grads = actor_loss_and_grads(actor, critic, s)
numeric = finite_difference(lambda: actor_loss_and_grads(actor, critic, s)[0],
                            actor)
print(f"actor:  loss {loss:.4f}, worst gradient gap "
      f"{worst_gap(grads, numeric):.2e} relative")

# Mean-reverting exploration noise: variance sigma^2 / (2 theta - theta^2).
noise = OuNoise(theta=0.15, sigma=0.2, rng=np.random.default_rng(1))
samples = np.array([noise.step() for _ in range(100_000)])[1000:]
expect = 0.2 ** 2 / (2 * 0.15 - 0.15 ** 2)
print(f"\nexploration noise over 1e5 steps: mean {samples.mean():+.4f}, "
      f"variance {samples.var():.4f} (stationary prediction {expect:.4f})")
rho = np.corrcoef(samples[:-1], samples[1:])[0, 1]
print(f"lag-1 autocorrelation {rho:.3f} (prediction {1 - 0.15:.3f})")
