# Copyright 2023 Canonical Ltd.
# See LICENSE file for licensing details.

"""Finite element toolkit for elliptic interface problems with flux recovery.

The library is split the same way the computation flows:

- `numerics`: sparse assembly container, SPD and least-squares solves, quadrature.
- `problems`: manufactured problems carrying exact solutions and jump data.
- `ifem1d` and `flux1d`: the 1D immersed finite element solver and the
  postprocessed flux functionals at the interface and the boundary.
- `mesh2d` and `fem2d`: the 2D triangulation, the tube around a circular
  interface, and the augmented least-squares formulation.
- `norms`: error norms measured against the manufactured solutions.
"""
