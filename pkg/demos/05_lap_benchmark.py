"""Assignment-solver scaling measurement.

Times the solver on square uniform-random matrices and fits the log-log
slope. The worst-case Hungarian bound is cubic; shortest-augmenting-path
solvers land between quadratic and cubic on random dense inputs, which is
why correspondence is solved at reduced resolutions rather than full frame
resolution.
"""

from framealign import bench_lap


def main() -> None:
    res = bench_lap(sizes=(128, 256, 512, 1024), seed=0)
    print(f"{'n':>6}  {'seconds':>10}")
    for n, t in zip(res.sizes, res.seconds):
        print(f"{n:>6}  {t:>10.4f}")
    print(f"fitted scaling exponent: {res.slope:.2f}")


if __name__ == "__main__":
    main()
