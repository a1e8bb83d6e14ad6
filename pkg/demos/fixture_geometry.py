"""Walk through the bundled one-dimensional relation tables.

    python3 demos/fixture_geometry.py
"""
import numpy as np

from expressive_kge.geometry import (
    center_and_corners,
    certify_patterns,
    comp_def_region,
    head_tail_intervals,
    load_fixture,
    parallelogram_of,
    region_subsumed_by,
)


def show_relation(model, name):
    p = parallelogram_of(model.relation(model.relation_position(name)))
    iv = head_tail_intervals(p)
    center, corners = center_and_corners(p)
    print(f"{name:8s} center {np.round(center, 4)}  heads {np.round(iv.head_interval, 4)}  "
          f"tails {np.round(iv.tail_interval, 4)}  {len(corners)} corners")


def main():
    model = load_fixture("general_composition")
    for name in model.relation_ids:
        show_relation(model, name)

    r1, r2, r3 = (model.relation(model.relation_position(n)) for n in ("r1", "r2", "r3"))
    region = comp_def_region(r1, r2)
    print("\ncomposed region of r1 then r2, vertices (x, z):")
    print(np.round(region.vertices(), 4))
    print("inside r3:", region_subsumed_by(region, parallelogram_of(r3)))

    print("\npatterns captured among r1, r2, r3:")
    for cert in certify_patterns(model, ["r1", "r2", "r3"]):
        extra = f"margin {cert.margin:.4g}" if np.isfinite(cert.margin) else ""
        print(f"  {cert.pattern:20s} {', '.join(cert.relations):12s} {extra}")

    print("\nintersection table:")
    for cert in certify_patterns(load_fixture("intersection")):
        print(f"  {cert.pattern:20s} {', '.join(cert.relations)}")


if __name__ == "__main__":
    main()
