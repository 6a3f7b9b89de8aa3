"""Wall-clock comparison of the compiled and pure-Python simulation loops.

    python benchmarks/bench_backends.py --duration 1.0 --repeat 3
"""
import argparse
import statistics
import time
from dataclasses import replace

from maglev_drem.config import CONTROLLERS, ScenarioConfig
from maglev_drem.harness import SimulationAborted, compiled_available, simulate


def best_time(cfg, backend, repeat):
    times, log = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        try:
            log = simulate(cfg, backend=backend)
        except SimulationAborted as exc:
            log = exc.log
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), log


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--duration", type=float, default=1.0)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--controller", choices=CONTROLLERS, default="ida-state")
    args = parser.parse_args(argv)
    if not compiled_available():
        parser.error("compiled kernel is not built; run `pip install -e . --no-build-isolation`")

    cfg = ScenarioConfig().with_controller(args.controller)
    cfg = replace(cfg, sim=replace(cfg.sim, duration=args.duration))
    print(f"{cfg.n_steps} steps, controller {args.controller}, best of {args.repeat}")
    results = {}
    for backend in ("compiled", "python"):
        best, median, log = best_time(cfg, backend, args.repeat)
        results[backend] = (best, log)
        print(f"  {backend:8s} best {best:8.3f} s  median {median:8.3f} s  "
              f"{cfg.n_steps / best / 1e6:7.3f} Msteps/s")
    print(f"  speed-up {results['python'][0] / results['compiled'][0]:.1f}x, logs identical: "
          f"{results['compiled'][1].equals(results['python'][1])}")


if __name__ == "__main__":
    main()
