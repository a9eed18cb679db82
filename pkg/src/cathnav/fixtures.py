"""Canonical phantom fixtures, written byte-stable.

Geometry is chosen so every lumen is wider than the catheter's maximal
lateral tip offset (~33 px), keeping the bend free to express its full
offset range, and so the default straight-ahead tip direction picks the
wrong branch (steering has to be learned, not inherited).
"""

STRAIGHT = """\
format: 1
canvas: [960, 720]
nodes:
- [40.0, 360.0]
- [910.0, 360.0]
edges:
- {id: trunk, from: 0, to: 1, radius: 40.0}
bifurcations: []
entry: 0
target: {center: [850.0, 360.0], radius: 38.0}
"""

Y_BIFURCATION = """\
format: 1
canvas: [960, 720]
nodes:
- [40.0, 360.0]
- [450.0, 360.0]
- [790.0, 556.3]
- [790.0, 163.7]
edges:
- {id: trunk, from: 0, to: 1, radius: 40.0}
- {id: branch_pos, from: 1, to: 2, radius: 36.0}
- {id: branch_neg, from: 1, to: 3, radius: 36.0}
bifurcations:
- {node: 1, parent: trunk, daughters: [branch_pos, branch_neg]}
entry: 0
target: {center: [709.8, 210.0], radius: 38.0}
"""

RENAL_TWO_LEVEL = """\
format: 1
canvas: [960, 720]
nodes:
- [40.0, 360.0]
- [380.0, 360.0]
- [605.2, 230.0]
- [605.2, 490.0]
- [845.2, 230.0]
- [720.2, 30.8]
edges:
- {id: trunk, from: 0, to: 1, radius: 40.0}
- {id: branch_neg, from: 1, to: 2, radius: 36.0}
- {id: branch_pos, from: 1, to: 3, radius: 36.0}
- {id: sub_straight, from: 2, to: 4, radius: 34.0}
- {id: sub_steep, from: 2, to: 5, radius: 34.0}
bifurcations:
- {node: 1, parent: trunk, daughters: [branch_pos, branch_neg]}
- {node: 2, parent: branch_neg, daughters: [sub_straight, sub_steep]}
entry: 0
target: {center: [775.2, 230.0], radius: 38.0}
"""

FIXTURES = {
    "straight": STRAIGHT,
    "y_bifurcation": Y_BIFURCATION,
    "renal_two_level": RENAL_TWO_LEVEL,
}


def fixture_text(name):
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return FIXTURES[name]


def write_fixture(name, directory):
    """Write the canonical fixture file ``<name>.phantom``; byte-stable."""
    import os

    text = fixture_text(name)
    path = os.path.join(str(directory), f"{name}.phantom")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path
