"""Measure the worst-case ratios of several anisotropic inequalities on random ensembles.

Usage: python demos/inequality_lab.py
"""

from nsbh.ensembles import EnsembleSpec
from nsbh.grid import AnisoGrid
from nsbh.inequalities import (
    bernstein_slope,
    check_commutator,
    check_embedding_l4h_linfv,
    check_lemma5_ensemble,
    check_product_rule,
)


def show(rep):
    print(f"  {rep.inequality_id:<28} max ratio {rep.ratio:.4e} over {rep.n_samples} samples")


def main():
    grid = AnisoGrid(16, 32)
    white = EnsembleSpec(12, "white", seed=1, grid=grid)

    sl = bernstein_slope(EnsembleSpec(12, "white", seed=1, grid=AnisoGrid(16, 64)))
    print(f"vertical Bernstein: log2 ratio grows with slope {sl['slope']:.3f} per block (expected 1)")

    print("product rule, sigma=sigma'=s=1/2, s0=1, plain and dyadically shifted inputs")
    band = EnsembleSpec(12, "white", seed=1, grid=grid, vband=8)
    show(check_product_rule(band, 0.5, 0.5, 0.5, 1.0))
    show(check_product_rule(band, 0.5, 0.5, 0.5, 1.0, shift=True))

    print("commutator with a smooth vertical profile")
    show(check_commutator(EnsembleSpec(12, "aniso:0,0.5", seed=1, grid=grid)))

    print("energy pairing estimates at s=0.75, delta=0.5")
    for rep in check_lemma5_ensemble(white, 0.75, 0.5).values():
        show(rep)

    print("L^4_h L^inf_v embedding at s=0.75")
    show(check_embedding_l4h_linfv(white, 0.75))


if __name__ == "__main__":
    main()
