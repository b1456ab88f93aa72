"""Build a mass-threshold covering of two Gaussian bumps and print it level by level."""

import numpy as np

from ltlab.geometry import build_ball_cover, build_covering, check_covering, demo_density


def main():
    rho = demo_density("twobumps", 2)
    cov = build_covering(rho, delta=0.3, epsilon="1/3")
    print(f"terminated={cov.terminated} depth={cov.depth} mass={cov.total_mass:.4f}")
    for rec in cov.levels:
        sizes = [len(k.members) for k in rec.class1]
        print(f"level {rec.n}: class0={len(rec.class0):3d} class1 sizes={sizes} "
              f"class2={len(rec.class2)}")
    print("invariant problems:", check_covering(cov) or "none")
    for n in cov.class2_levels():
        bc = build_ball_cover(cov, n)
        print(f"level {n}: {len(bc.centers)} balls, radius {bc.radius:.3g}, "
              f"overlap {bc.overlap_bound}, min mass {np.min(bc.masses):.3f}")


if __name__ == "__main__":
    main()
