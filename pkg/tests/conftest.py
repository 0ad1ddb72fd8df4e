import numpy as np
from hypothesis import settings
from hypothesis import strategies as st

from keysec import probcore as pc

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@st.composite
def float_dists(draw, min_n=1, max_n=6):
    """Random float ProbVecs, including sparse ones with exact zeros."""
    n = draw(st.integers(min_n, max_n))
    N = 1 << n
    w = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=N, max_size=N))
    arr = np.array(w, dtype=float)
    if arr.sum() <= 1e-6:
        arr[draw(st.integers(0, N - 1))] = 1.0
    return pc.ProbVec(n, arr / arr.sum())


@st.composite
def exact_dists(draw, min_n=1, max_n=4):
    n = draw(st.integers(min_n, max_n))
    N = 1 << n
    w = draw(st.lists(st.integers(0, 20), min_size=N, max_size=N))
    if sum(w) == 0:
        w[0] = 1
    from fractions import Fraction
    total = sum(w)
    return pc.ProbVec(n, [Fraction(x, total) for x in w])
