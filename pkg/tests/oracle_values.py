"""Reference values computed independently of the package.

a_star, UB and c_star come from a 50-digit mpmath solve (``mpmath.findroot`` on the
scalar a_star equation, then the closed-form delta/lambda/c maps), not from the
package's own root finder. Closed forms are spelled out where they exist.
"""

import math

SQRT3 = math.sqrt(3.0)
UB2 = math.sqrt(6.0 * SQRT3 - 8.0)
A_STAR_2 = 1.0 - SQRT3 / 2.0
C_STAR_2 = (1.0 + SQRT3) / 4.0

# q: (a_star, ub(q), c_star)
MP_TABLE = {
    1.1: (0.19274993831991621198, 1.0753605779669834075, 0.75369875049057071016),
    1.25: (0.17917006998116328973, 1.177179484427139293, 0.73737088277104765841),
    1.5: (0.16071324478583886745, 1.3223849830285409992, 0.7151819360763238453),
    2.0: (0.13397459621556135324, 1.5467077440205902587, 0.68301270189221932338),
    3.0: (0.10156670154840336997, 1.8411613671354053957, 0.64379575656439551092),
    5.0: (0.069470347007239891945, 2.1588276679084451118, 0.60417209914025026545),
    10.0: (0.039592282575348042689, 2.4823155577261553312, 0.56540530239290916381),
    50.0: (0.0092838699064650333535, 2.8554359977305986814, 0.52008550517440467024),
    1000.0: (0.00049670549769447015418, 2.9895236330355321049, 0.50172936171915432106),
}

# Worst-case ratio at q = 2 with k = floor(a_star d); hand evaluation of the
# closed form, k/d = 1/8 for d in {8, 16, 64}.
LB2 = {8: 1.5313688882521292, 16: 1.5313688882521292, 64: 1.5313688882521292, 256: 1.5447923330551847}

# Robustness of CMP at c = 1/2: (-4 sqrt2 c + 6 sqrt2 + 10c - 8)^(1/2) / (1-c) with c = 1/2,
# i.e. 2 * sqrt(4 sqrt2 - 3).
ROBUST_HALF = 2.0 * math.sqrt(4.0 * math.sqrt(2.0) - 3.0)
