"""Regenerates the report fixture and its expected tables.

Run from this directory: python3 make_golden.py
The statistics are computed here with numpy, independently of the Rust code.
"""

import numpy as np

JOINTS = [
    "Hips", "Ab", "Chest", "Neck", "Head",
    "LShoulder", "LUArm", "LFArm", "LHand",
    "RShoulder", "RUArm", "RFArm", "RHand",
    "LThigh", "LShin", "LFoot", "LToe",
    "RThigh", "RShin", "RFoot", "RToe",
]
PARTS = [
    ("Head", ["Neck", "Head"]),
    ("Spine", ["Hips", "Ab", "Chest"]),
    ("Arms", ["LShoulder", "LUArm", "LFArm", "LHand", "RShoulder", "RUArm", "RFArm", "RHand"]),
    ("Legs", ["LThigh", "LShin", "LFoot", "LToe", "RThigh", "RShin", "RFoot", "RToe"]),
]
# (variant, column name) in column order.
TASKS = [
    ("OneLegStand", "Stand"),
    ("TiltLeftRight", "Tilt"),
    ("Bow", "Bow"),
    ("StandAndSit", "Stand and Sit"),
    ("Squat", "Squat"),
    ("Walk", "Walk"),
]
# Frame label cycle; Unknown frames are left out of every table.
CYCLE = ["Squat", "Bow", "Unknown", "OneLegStand", "Walk", "TiltLeftRight", "StandAndSit", "Bow", "Squat"]
FRAMES = 240


def fixture():
    labels = [CYCLE[(f * 4 + f // 9) % len(CYCLE)] for f in range(FRAMES)]
    errors = np.zeros((FRAMES, len(JOINTS)))
    for f in range(FRAMES):
        for j in range(len(JOINTS)):
            errors[f, j] = ((f * 37 + j * 101 + f * j * 13) % 761) / 8.0 + 2.0 * j
    return labels, errors


def stats(values):
    v = np.asarray(values, dtype=float)
    return np.sqrt(np.mean(v * v)), np.median(v), np.std(v)


def mm(x):
    return f"{x:.1f}"


def main():
    labels, errors = fixture()
    with open("report_fixture.csv", "w") as fh:
        fh.write("frame,task," + ",".join(JOINTS) + "\n")
        for f in range(FRAMES):
            fh.write(f"{f},{labels[f]}," + ",".join(f"{e:.3f}" for e in errors[f]) + "\n")

    present = [(v, name) for v, name in TASKS if v in labels]
    rows = {v: [f for f in range(FRAMES) if labels[f] == v] for v, _ in present}

    task_stats = [stats(errors[rows[v]].ravel()) for v, _ in present]
    with open("table_tasks.csv", "w") as fh:
        fh.write("Task," + ",".join(name for _, name in present) + "\n")
        for i, row in enumerate(["RMSE", "Median_error", "Std. Dev. Error"]):
            fh.write(row + "," + ",".join(mm(s[i]) for s in task_stats) + "\n")

    with open("table_parts.csv", "w") as fh:
        fh.write("Part,Task,Median Error,Std. Dev. Error\n")
        for part, members in PARTS:
            cols = [JOINTS.index(j) for j in members]
            meds, stds = [], []
            for v, name in present:
                _, med, sd = stats(errors[np.ix_(rows[v], cols)].ravel())
                meds.append(med)
                stds.append(sd)
                fh.write(f"{part},{name},{mm(med)},{mm(sd)}\n")
            fh.write(f"{part},Average,{mm(sum(meds) / len(meds))},{mm(sum(stds) / len(stds))}\n")


if __name__ == "__main__":
    main()
