"""A relay that re-emits the same molecule.

Placing a relay population between transmitter and receiver and having it
amplify what it senses adds A0 * r1 / r3 to the receiver's concentration.
The receiver can't tell the two contributions apart, so the relay simply
stretches the usable concentration range. This helps most when that range
is narrow.
"""
from molrelay import ChannelParams, Geometry, RelayConfig, blahut_arimoto, build_channel

params = ChannelParams(sigma0_sq=0.1, n=25, n_receptors=10)

for geometry in (Geometry(r1=1, r2=1, r3=1), Geometry(r1=1, r2=0.5, r3=2)):
    print(f"r1={geometry.r1} r2={geometry.r2} r3={geometry.r3}")
    for a_max in (0.1, 1.0, 10.0, 50.0):
        p = params.with_(a_max=a_max)
        direct = blahut_arimoto(build_channel(p, RelayConfig(geometry, "direct"))).capacity_bits
        relayed = blahut_arimoto(build_channel(p, RelayConfig(geometry, "single_type"))).capacity_bits
        noisy = blahut_arimoto(build_channel(
            p, RelayConfig(geometry, "single_type", include_relay_noise=True))).capacity_bits
        print(f"  a_max={a_max:5.1f}  direct {direct:.3f}  relay {relayed:.3f} (+{relayed - direct:.3f})"
              f"  relay with its own reception noise {noisy:.3f}")

# With a relay as close to the receiver as the transmitter, the relay's
# own sensing noise is a quarter of the receiver's variance and eats the
# whole gain. Moving the relay away from the receiver (r3 = 2) shrinks the
# gain and the noise penalty together.
