"""Profiles of the three classification losses as functions of the margin.

The engine only ever sees a loss through three callables: its value, its
first derivative, and its second derivative at a margin a = y * x.theta.
The table below shows how differently the three behave:

  logistic  smooth everywhere, curvature peaks at the decision boundary
  hinge     kinked at a = 1, zero curvature elsewhere, slope -1 for all
            mistakes no matter how wrong
  quasi01   kinked at a = 0 and a = eps, exactly zero for a >= eps, and
            nearly flat (slope eps) on the mistake side, so one badly
            misclassified point costs about 1 instead of |a|

The second derivatives are what the Taylor-based fitting schemes consume;
both kinked losses report zero curvature almost everywhere, which is why
those schemes cannot tighten a posterior on their own (see
demos/scheme_gallery.py).

    python demos/loss_landscape.py
"""

import numpy as np

from ffep.losses import hinge, logistic, loss_derivatives, loss_value, quasi01


def main():
    margins = np.array([-3.0, -1.0, -0.2, 0.05, 0.5, 0.999, 1.5, 3.0])
    losses = [logistic(), hinge(), quasi01(0.1)]

    for loss in losses:
        vals = loss_value(loss, margins)
        d1, d2 = loss_derivatives(loss, margins)
        print(f"{loss.name}:")
        print(f"  {'a':>7} {'value':>9} {'d1':>9} {'d2':>9}")
        for a, v, g, h in zip(margins, vals, d1, d2):
            print(f"  {a:>7.3f} {v:>9.4f} {g:>9.4f} {h:>9.4f}")
        print()

    # tail behavior: linear growth vs near-flatness for confident mistakes
    bad = np.array([-5.0, -20.0, -100.0])
    print("loss at large negative margins (confident mistakes):")
    for loss in losses:
        print(f"  {loss.name:<9} {np.round(loss_value(loss, bad), 4)}")

    # the quasi 0-1 plateau: everything past a >= eps costs exactly zero
    eps = 0.1
    q = quasi01(eps)
    plateau = loss_value(q, np.array([eps, 0.2, 1.0, 50.0]))
    print(f"\nquasi01(eps={eps}) on margins >= eps: {plateau}")


if __name__ == "__main__":
    main()
