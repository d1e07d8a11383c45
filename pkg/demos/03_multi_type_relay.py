"""A relay that answers with a different molecule.

Now the receiver has two receptor types and sees two independent noisy
copies of the same activation level. It can keep both counts or only
their sum. For this noise model the sum is nearly as good as the pair,
and both beat a single relay that adds to the same molecule.
"""
from molrelay import ChannelParams, blahut_arimoto, discretize_direct, discretize_joint, discretize_sum
from molrelay.relay import RelayConfig, build_channel

params = ChannelParams(sigma0_sq=0.1, n=25, n_receptors=10)

print(" a_max   direct  single   sum     joint   joint-sum")
for a_max in (0.1, 1.0, 10.0, 50.0):
    p = params.with_(a_max=a_max)
    direct = blahut_arimoto(discretize_direct(p)).capacity_bits
    single = blahut_arimoto(build_channel(p, RelayConfig(mode="single_type"))).capacity_bits
    summed = blahut_arimoto(discretize_sum(p))
    # the rotated (sum, |difference|) grid keeps the sum channel as an exact marginal
    joint = blahut_arimoto(discretize_joint(p, coords="sum_diff"), init=summed.input_distribution)
    print(f"{a_max:6.1f}  {direct:.3f}   {single:.3f}   {summed.capacity_bits:.3f}   "
          f"{joint.capacity_bits:.3f}   {joint.capacity_bits - summed.capacity_bits:.4f}")
