"""A single bacterial link: how much can one population tell another?

The transmitter holds a molecule concentration A0 at the receiver. Each of
the receiver's n*N receptors is bound with probability p0, and the output
count is Gaussian with a spread that vanishes at p0 = 0 and p0 = 1 and
peaks at p0 = 1/2. We look at that noise profile, then turn the link into
a finite channel and ask for its capacity.
"""
import numpy as np

from molrelay import (
    ChannelParams,
    activation_probability,
    blahut_arimoto,
    discretize_direct,
    output_moments,
)

params = ChannelParams(sigma0_sq=0.1, n=25, n_receptors=10, a_max=1.0)

print("concentration -> activation -> output count")
for a in (0.0, 0.25, 1.0, 4.0):
    p = float(activation_probability(a, params))
    m = output_moments(p, params)
    print(f"  A0={a:5.2f}  p0={p:.3f}  mean={m.mean:7.2f}  sd={np.sqrt(m.variance):6.2f}")

# The noise is relative: sd/mean = sigma0 (1 - p) / sqrt(n), so high
# activations are read almost exactly.
print("\ncapacity as the allowed concentration range grows")
for a_max in (0.1, 1.0, 10.0, 50.0):
    ch = discretize_direct(params.with_(a_max=a_max))
    res = blahut_arimoto(ch)
    r = res.input_distribution
    print(f"  a_max={a_max:5.1f}  C={res.capacity_bits:.3f} bits  "
          f"mass on the two end levels={r[0] + r[-1]:.3f}  ({res.iterations} iterations)")
