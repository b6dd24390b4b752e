"""Generate the mesh fixtures shipped in meshes/.

Produces the unit icosahedron and its sphere-projected refinements
(80, 320 and 1280 triangles). The refined meshes are scaled radially so
that their total area equals 4 pi: a polyhedron with vertices exactly on
the unit sphere underestimates the surface systematically, which shows up
as an O(h^2) bias against analytic unit-sphere references. Equal-area
scaling removes the leading term of that bias.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from tdbem.mesh import SurfaceMesh, icosahedron, refine, save_mesh


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "meshes"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    mesh = icosahedron()
    save_mesh(mesh, os.path.join(args.out, "icosahedron.off"))
    for _ in range(3):
        mesh = refine(mesh, project_unit_sphere=True)
        scale = np.sqrt(4.0 * np.pi / mesh.areas.sum())
        scaled = SurfaceMesh(mesh.vertices * scale, mesh.triangles)
        name = f"sphere{mesh.num_triangles}.off"
        save_mesh(scaled, os.path.join(args.out, name))
        print(f"wrote {name}: {scaled.num_vertices} vertices, "
              f"{scaled.num_triangles} triangles, radius {scale:.6f}")


if __name__ == "__main__":
    main()
