"""Walk through the physical layer: capacities, rates, and semantic-information age.

Five users sit at 100..500 m from the provider.  Each one receives an
extracted semantic payload (a fraction of a 10 MB source) over its own OFDMA
resource block; freshness is the payload size divided by the achieved rate.
"""

import numpy as np

from semcom_market.channel import (
    SemanticPayload,
    aosi,
    channel_capacity,
    dbm_to_watts,
    transmission_rate,
)
from semcom_market.config import load_config

cfg = load_config()
market = cfg.market()

print("Radio constants: P = 40 dBm =", dbm_to_watts(40.0), "W;",
      "N0 = -150 dBm =", dbm_to_watts(-150.0), "W")
print()
print(f"{'user':>4} {'d [m]':>6} {'SNR':>10} {'C [bit/s/Hz]':>13} {'V [Mbit]':>9} "
      f"{'rate@10MHz':>12} {'AoSI [ms]':>10}")
for i, user in enumerate(market.users):
    cap = channel_capacity(user.link)
    rate = transmission_rate(10e6, cap)            # 10 MHz allocation, bit/s
    age = aosi(user.payload, rate)
    print(f"{i:>4} {user.link.distance_m:>6.0f} {user.link.snr:>10.2e} {cap:>13.4f} "
          f"{user.volume_mbit:>9.1f} {rate/1e6:>10.1f} Mb {age*1e3:>10.2f}")

print()
print("Freshness scales inversely with bandwidth: doubling the allocation")
user = market.users[0]
for mhz in (5, 10, 20, 40):
    age = aosi(user.payload, transmission_rate(mhz * 1e6, channel_capacity(user.link)))
    print(f"  {mhz:>3} MHz -> AoSI {age*1e3:7.2f} ms")

print()
print("and linearly with the compression rate at a fixed 10 MHz:")
for rate_frac in (0.3, 0.5, 0.7, 1.0):
    payload = SemanticPayload(source_bits=8e7, compression_rate=rate_frac)
    age = aosi(payload, transmission_rate(10e6, channel_capacity(user.link)))
    print(f"  R = {rate_frac:.1f} -> AoSI {age*1e3:7.2f} ms")
