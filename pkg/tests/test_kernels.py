import random

import pytest
from gmpy2 import mpq

from berezin import kernels


def _random_terms(rng, nvars, cap, count):
    out = {}
    for _ in range(count):
        k = [0] * nvars
        for _ in range(rng.randint(0, cap)):
            k[rng.randrange(nvars)] += 1
        out[tuple(k)] = mpq(rng.randint(-9, 9), rng.randint(1, 5))
    return {k: v for k, v in out.items() if v}


@pytest.mark.parametrize("nvars, cap, seed", [(2, 6, 0), (4, 8, 1), (4, 10, 2), (8, 6, 3)])
def test_backends_agree(nvars, cap, seed):
    rng = random.Random(seed)
    a = _random_terms(rng, nvars, cap, 40)
    b = _random_terms(rng, nvars, cap, 40)
    cons = [(tuple(range(nvars)), cap), ((0,), cap // 2)]
    results = [mod.mul(a, b, cons, nvars) for mod in kernels.backends().values()]
    for r in results[1:]:
        assert r == results[0]


def test_backend_selected():
    assert kernels.BACKEND in kernels.backends()


def test_pure_python_override():
    import os
    import subprocess
    import sys
    env = dict(os.environ, BEREZIN_PURE_PYTHON="1")
    res = subprocess.run([sys.executable, "-c", "from berezin import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert res.stdout.strip() == "python"
