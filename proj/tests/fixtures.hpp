#pragma once

// Small structured meshes shared by the unit tests.

#include <vector>

#include "stflow/mesh.hpp"
#include "stflow/nurbs.hpp"

namespace stflow::testing {

// Single-patch rectangle [0,Lx]x[0,Ly] with uniform knots, optionally sheared
// (x += shear * y). All four sides are exterior.
inline SpatialMesh box_mesh(int nx, int ny, double Lx, double Ly, int p = 2, double shear = 0.0) {
  nurbs::NurbsPatch patch;
  patch.knots = {nurbs::uniform_knots(p, nx), nurbs::uniform_knots(p, ny)};
  patch.dim_space = 2;
  const auto gu = patch.knots[0].greville();
  const auto gv = patch.knots[1].greville();
  for (double v : gv)
    for (double u : gu) {
      patch.coords.push_back(Lx * u + shear * Ly * v);
      patch.coords.push_back(Ly * v);
      patch.weights.push_back(1.0);
    }
  SpatialMesh m;
  m.patches = {patch};
  m.patch_names = {"box"};
  m.sides = {{SideKind::Exterior, SideKind::Exterior, SideKind::Exterior, SideKind::Exterior}};
  m.degree = p;
  m.naca = "0012";
  merge_control_points(m);
  return m;
}

}  // namespace stflow::testing
