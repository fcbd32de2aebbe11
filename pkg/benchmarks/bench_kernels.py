"""Compare the numba and numpy element kernels.

    python benchmarks/bench_kernels.py [--n 64] [--repeat 5]

Both backends run on the same fluid-mesh coordinates; the first numba call
(compilation, or loading the on-disk cache) is excluded from the timings.
"""
import argparse
import time

import numpy as np

from stokes_darcy import _jit, kernels
from stokes_darcy.assembly import ModelParams
from stokes_darcy.fem_core import quad_triangle
from stokes_darcy.mesh import FLUID, build_structured_mesh, example51_domain
from stokes_darcy.solver import assemble_operators
from stokes_darcy.spaces import build_spaces


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="cells per unit length")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not _jit.HAVE_NUMBA:
        raise SystemExit("numba is not installed")

    mesh = build_structured_mesh(example51_domain(), args.n)
    coords = np.ascontiguousarray(mesh.triangle_coords(mesh.region_triangles(FLUID)))
    nt = len(coords)
    r4, r2, r6 = quad_triangle(4), quad_triangle(2), quad_triangle(6)
    signs = np.ones((nt, 3), dtype=np.int8)
    kinv = np.ones(2)
    local = np.random.default_rng(0).normal(size=(nt, 8))

    cases = {
        "geometry": lambda be: be["geometry"](coords),
        "mini_matrices": lambda be: be["mini_matrices"](coords, r4.points, r4.weights, 1.0),
        "rt0_mass": lambda be: be["rt0_mass"](coords, signs, kinv, r2.points, r2.weights),
        "rt0_values": lambda be: be["rt0_values"](coords, signs, r6.points),
        "mini_eval": lambda be: be["mini_eval"](coords, local, r6.points),
    }
    backends = {
        tag: {name: getattr(kernels, f"{name}_{tag}") for name in cases} for tag in ("np", "nb")
    }

    print(f"{nt} triangles (n={args.n}), best of {args.repeat}")
    print(f"{'kernel':<16}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, fn in cases.items():
        ref = fn(backends["np"])
        out = fn(backends["nb"])  # warm-up / compile
        ref = ref if isinstance(ref, tuple) else (ref,)
        out = out if isinstance(out, tuple) else (out,)
        diff = max(float(np.abs(a - b).max()) for a, b in zip(ref, out))
        t_np = best_of(lambda: fn(backends["np"]), args.repeat)
        t_nb = best_of(lambda: fn(backends["nb"]), args.repeat)
        print(f"{name:<16}{1e3 * t_np:12.3f}{1e3 * t_nb:12.3f}{t_np / t_nb:10.1f}{diff:13.1e}")

    spaces = build_spaces(mesh)
    p = ModelParams()
    row, previous = [], _jit.use_numba()
    for flag in (False, True):
        _jit.set_use_numba(flag)
        assemble_operators(mesh, spaces, p)
        row.append(best_of(lambda: assemble_operators(mesh, spaces, p), max(1, args.repeat // 2)))
    _jit.set_use_numba(previous)
    print(f"{'all operators':<16}{1e3 * row[0]:12.3f}{1e3 * row[1]:12.3f}{row[0] / row[1]:10.1f}")


if __name__ == "__main__":
    main()
