"""Pricing basics: call values, delta, and the implied-vol inversion.
=====================================================================

Everything else in the package is built on these primitives, so this
walkthrough starts here: price a call, read its delta, invert a price
back to a volatility, and move between the strike and log-return
coordinates.
"""

import numpy as np

from smilecal import (
    MarketEnv,
    bs_call_price,
    bs_delta,
    implied_vol,
    strike_to_x,
    x_to_strike,
)

# A pricing context: spot 100, 2% flat rate, half a year to expiry.
env = MarketEnv(spot=100.0, rate=0.02, maturity=0.5)
print(f"forward = {env.forward:.4f}")

# Price a small strike ladder at 20% vol.
strikes = np.array([80.0, 90.0, 100.0, 110.0, 125.0])
prices = bs_call_price(env, strikes, 0.2)
deltas = bs_delta(env, strikes, 0.2)
print("\nstrike   call     delta")
for k, c, d in zip(strikes, prices, deltas):
    print(f"{k:6.1f} {c:8.4f} {d:8.4f}")

# The inversion round-trips to machine noise: feed a price back in and
# recover the vol that produced it.
price = bs_call_price(env, 110.0, 0.2)
print(f"\nimplied_vol(K=110, C={price:.6f}) = {implied_vol(env, 110.0, price):.12f}")

# Smiles in this package live on the drift-adjusted log-return axis
# x = ln(K/S0) - rT. The forward strike sits exactly at x = 0.
print(f"\nx at the forward strike: {strike_to_x(env, env.forward):+.2e}")
xs = strike_to_x(env, strikes)
print("strike ->  x        -> strike again")
for k, x in zip(strikes, xs):
    print(f"{k:6.1f} -> {x:+.6f} -> {x_to_strike(env, x):10.4f}")
