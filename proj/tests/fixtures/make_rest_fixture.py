"""Regenerates hand23_rest.csv: joint positions of the default hand at the
all-zero pose, by multiplying each joint's ancestor chain out explicitly."""

import json
import math
import pathlib
import sys

import numpy as np


def rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=float)


def ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s, 0], [0, 1, 0, 0], [-s, 0, c, 0], [0, 0, 0, 1]], dtype=float)


def rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0, 0], [s, c, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)


def tx(length):
    m = np.eye(4)
    m[0, 3] = length
    return m


def main():
    here = pathlib.Path(__file__).resolve().parent
    config = json.loads((here / "../../configs/hand23.json").read_text())
    joints = config["joints"]
    index = {j["name"]: i for i, j in enumerate(joints)}

    out = ["# name,x,y,z"]
    for joint in joints:
        chain = []
        cur = joint
        while cur is not None:
            chain.append(cur)
            cur = joints[index[cur["parent"]]] if cur["parent"] is not None else None
        frame = np.eye(4)
        for link in reversed(chain):
            a, b, c = (math.radians(v) for v in link.get("rest_offset_deg", [0, 0, 0]))
            frame = frame @ rx(a) @ ry(b) @ rz(c) @ tx(link["bone_length_mm"])
        p = frame @ np.array([0, 0, 0, 1.0])
        out.append("%s,%.12f,%.12f,%.12f" % (joint["name"], p[0], p[1], p[2]))

    target = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else here / "hand23_rest.csv"
    target.write_text("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
