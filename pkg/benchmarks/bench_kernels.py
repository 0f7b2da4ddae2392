"""Compare the numba kernels with the plain-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--json out.json]

Each mode runs in a fresh interpreter because the switch
(LIEVORTEX_DISABLE_JIT) is read at import time.  JIT timings exclude the
first call, so compilation is reported separately.
"""
import argparse
import json
import os
import subprocess
import sys
import time

WORKLOADS = ("coupled_so3", "coupled_so4", "controlled_rollout", "controlled_jacobian", "frame_so6")


def _setup():
    import numpy as np

    from lievortex import kernels, liecore
    from lievortex.inertia import InertiaOperator

    rng = np.random.default_rng(0)

    def system(n, steps):
        op = InertiaOperator.manakov(np.linspace(1.0, 3.0, n))
        m_s = liecore.random_algebra(n, rng)
        g0 = liecore.random_group(n, rng)
        iu, ju = liecore.triu_indices(n)
        return g0, m_s, np.ascontiguousarray(op.ainv_matrix), iu, ju

    def coupled(n, steps):
        g0, m_s, ainv, iu, ju = system(n, steps)
        m0 = np.ascontiguousarray(g0.T @ m_s @ g0)
        lam = np.zeros((n, n))
        return lambda: kernels.coupled_trajectory(g0, m0, ainv, iu, ju, lam, 1e-3, steps)

    def controlled(jac):
        g0, m_s, ainv, iu, ju = system(3, 0)
        dirs = np.ascontiguousarray(np.array([liecore.elementary(3, 0, 1), liecore.elementary(3, 1, 2)]))
        values = rng.uniform(-1, 1, size=(20, 2))
        lam = np.zeros((3, 3))
        if jac:
            return lambda: kernels.controlled_jacobian(g0, m_s, ainv, iu, ju, lam, dirs, values, 0.02, 25, 1e-7)
        return lambda: kernels.controlled_rollout(g0, m_s, ainv, iu, ju, lam, dirs, values, 0.02, 25)

    def frame():
        from lievortex.vortex import darboux_decompose

        g0, m_s, ainv, iu, ju = system(6, 0)
        fr = darboux_decompose(m_s)
        z0 = np.ascontiguousarray(np.vstack([fr.X, fr.Y]))
        shifts = np.zeros((1, 6, 6))
        return lambda: kernels.frame_trajectory(z0, fr.X.shape[0], ainv, iu, ju, shifts, 1e-3, 2000)

    return {
        "coupled_so3": coupled(3, 10000),
        "coupled_so4": coupled(4, 10000),
        "controlled_rollout": controlled(False),
        "controlled_jacobian": controlled(True),
        "frame_so6": frame(),
    }


def _worker(repeat):
    from lievortex import _jit

    out = {"jit": _jit.USE_JIT, "results": {}}
    for name, fn in _setup().items():
        t0 = time.perf_counter()
        fn()
        first = time.perf_counter() - t0
        times = []
        for _ in range(repeat):
            t0 = time.perf_counter()
            fn()
            times.append(time.perf_counter() - t0)
        out["results"][name] = {"first_call": first, "best": min(times)}
    print(json.dumps(out))


def _run_mode(disable, repeat):
    env = dict(os.environ)
    env["LIEVORTEX_DISABLE_JIT"] = "1" if disable else "0"
    proc = subprocess.run([sys.executable, __file__, "--worker", "--repeat", str(repeat)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--json", help="write raw timings here")
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.worker:
        _worker(args.repeat)
        return
    jit = _run_mode(False, args.repeat)
    ref = _run_mode(True, args.repeat)
    print(f"{'workload':<22}{'numba [s]':>12}{'compile+1st [s]':>18}{'numpy [s]':>12}{'speedup':>10}")
    for name in WORKLOADS:
        a, b = jit["results"][name], ref["results"][name]
        print(f"{name:<22}{a['best']:>12.4f}{a['first_call']:>18.3f}{b['best']:>12.4f}"
              f"{b['best'] / a['best']:>10.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": jit, "numpy": ref}, fh, indent=2)


if __name__ == "__main__":
    main()
