"""Expected temporal consistency for the synthetic annotator types.

genuine: two ratings mu + N(0, s) differ by N(0, s * sqrt(2)), so
P(|d| <= tau) = 2 * Phi(tau / (s * sqrt(2))) - 1.
non_attitude: two independent U(0, 100) ratings satisfy
P(|U - U'| <= tau) = 1 - (1 - tau / 100) ** 2.
constructed, across framing variants: offsets N(0, o) per variant plus
noise give d ~ N(0, sqrt(2 o^2 + 2 s^2)).
"""
import math

from scipy.stats import norm

TAU, NOISE, OFFSET = 15.0, 5.0, 30.0
print("genuine_temp =", 2 * norm.cdf(TAU / (NOISE * math.sqrt(2))) - 1)
print("non_attitude_temp =", 1 - (1 - TAU / 100) ** 2)
print("constructed_frame =",
      2 * norm.cdf(TAU / math.sqrt(2 * OFFSET ** 2 + 2 * NOISE ** 2)) - 1)

# Scores are clamped to [0, 100] and item means are U(10, 90); clamping pulls
# far-apart framed ratings together. Integrate over mu and the first rating.
from scipy import integrate

SD = math.sqrt(OFFSET ** 2 + NOISE ** 2)


def clamped_frame(mu):
    lo_mass = norm.cdf(-mu / SD)            # first rating clamped to 0
    hi_mass = norm.sf((100 - mu) / SD)      # first rating clamped to 100

    def p_within(x):
        a, b = max(x - TAU, 0.0), min(x + TAU, 100.0)
        p = norm.cdf((b - mu) / SD) - norm.cdf((a - mu) / SD)
        if a <= 0.0:
            p += norm.cdf(-mu / SD)
        if b >= 100.0:
            p += norm.sf((100 - mu) / SD)
        return p

    inner, _ = integrate.quad(lambda x: norm.pdf((x - mu) / SD) / SD * p_within(x), 0, 100,
                              limit=200)
    return inner + lo_mass * p_within(0.0) + hi_mass * p_within(100.0)


val, _ = integrate.quad(clamped_frame, 10, 90, limit=200)
print("constructed_frame_clamped =", val / 80)
