"""Compare the compiled and numpy kernels on realistic workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]

``eq2_moments`` is timed on a Monte-Carlo block of 18-ion realisations and
``subset_product`` on an 18-emitter delay grid; both backends are checked
against each other before timing.
"""

import argparse
import timeit

import numpy as np

from ioncorr import _backend


def workloads(rng):
    phases = rng.uniform(-200, 200, size=(20000, 18))
    active = (rng.random((20000, 18)) > 0.4).astype(np.uint8)
    factors = 0.3 * (rng.normal(size=(18, 401, 16)) + 1j * rng.normal(size=(18, 401, 16)))
    factors[:, :, 0] = 1.0
    return {
        "eq2_moments (20000 x 18)": lambda k: k.eq2_moments(phases, active, 0.6),
        "subset_product (18 x 401)": lambda k: k.subset_product(factors),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    names = list(_backend.AVAILABLE)
    print(f"backends: {', '.join(names)} (active: {_backend.NAME})")
    for label, fn in workloads(np.random.default_rng(0)).items():
        outputs = {n: fn(_backend.get(n)) for n in names}
        ref = outputs["python"]
        for n, out in outputs.items():
            pairs = zip(out, ref) if isinstance(ref, tuple) else [(out, ref)]
            assert all(np.allclose(a, b, rtol=1e-12, atol=1e-12) for a, b in pairs), n
        times = {n: min(timeit.repeat(lambda: fn(_backend.get(n)), number=1, repeat=args.repeat)) for n in names}
        line = "  ".join(f"{n} {1e3 * t:8.2f} ms" for n, t in times.items())
        if "cython" in times:
            line += f"  speed-up x{times['python'] / times['cython']:.1f}"
        print(f"{label:28s} {line}")


if __name__ == "__main__":
    main()
