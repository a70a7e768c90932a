#!/usr/bin/env python3
"""Regenerate the bundled CSV datasets under data/.

UCI tables come from the copies shipped with scikit-learn so the build never
needs network access. The 2-D clustering sets are synthetic stand-ins generated
with fixed seeds.
"""
import hashlib
import json
import pathlib

import numpy as np
from sklearn import datasets

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def write_csv(name, X, y=None, feature_names=None, fmt="%.6g"):
    path = OUT / f"{name}.csv"
    d = X.shape[1]
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(d)]
    names = [n.replace(",", " ").replace(" ", "_") for n in names]
    with open(path, "w", newline="\n") as f:
        header = names + (["label"] if y is not None else [])
        f.write(",".join(header) + "\n")
        for i in range(X.shape[0]):
            row = [fmt % v for v in X[i]]
            if y is not None:
                row.append(str(int(y[i])))
            f.write(",".join(row) + "\n")
    return path


def fnv1a64(data: bytes) -> str:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


def blobs3(rng):
    centers = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.85]])
    X = np.vstack([c + 0.05 * rng.standard_normal((200, 2)) for c in centers])
    y = np.repeat(np.arange(3), 200)
    return X, y


def gauss15(rng):
    # 15 Gaussian clusters with moderate overlap, 5000 points.
    centers = rng.uniform(0.0, 10.0, size=(15, 2))
    while True:
        dist = np.linalg.norm(centers[:, None] - centers[None], axis=-1) + np.eye(15) * 99
        if dist.min() > 1.6:
            break
        centers = rng.uniform(0.0, 10.0, size=(15, 2))
    X, y = [], []
    for k, c in enumerate(centers):
        a = rng.uniform(0.15, 0.35, size=2)
        theta = rng.uniform(0, np.pi)
        R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        pts = (rng.standard_normal((333, 2)) * a) @ R.T + c
        X.append(pts)
        y.append(np.full(333, k))
    return np.vstack(X), np.concatenate(y)


def ring15(rng):
    # R15-like: one central cluster, an inner ring of 7 and an outer ring of 7.
    centers = [np.zeros(2)]
    for i in range(7):
        t = 2 * np.pi * i / 7
        centers.append(1.0 * np.array([np.cos(t), np.sin(t)]))
        centers.append(2.2 * np.array([np.cos(t + 0.45), np.sin(t + 0.45)]))
    X = np.vstack([c + 0.12 * rng.standard_normal((40, 2)) for c in centers])
    y = np.repeat(np.arange(15), 40)
    return X, y


def spirals(rng):
    X, y = [], []
    for k in range(3):
        t = np.sqrt(rng.uniform(0.05, 1.0, 104)) * 3.5 * np.pi
        phase = 2 * np.pi * k / 3
        pts = np.c_[t * np.cos(t + phase), t * np.sin(t + phase)] + 0.25 * rng.standard_normal((104, 2))
        X.append(pts)
        y.append(np.full(104, k))
    return np.vstack(X), np.concatenate(y)


def moons(rng):
    X, y = datasets.make_moons(n_samples=373, noise=0.06, random_state=7)
    return X, y


def main():
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(20240611)
    manifest = {}

    def record(name, path, label_column, source, kind):
        manifest[name] = {
            "path": path.name,
            "label_column": label_column,
            "checksum_fnv1a64": fnv1a64(path.read_bytes()),
            "source": source,
            "kind": kind,
        }

    for name, loader in [("iris", datasets.load_iris), ("wine", datasets.load_wine),
                         ("breast_cancer", datasets.load_breast_cancer), ("digits", datasets.load_digits)]:
        d = loader()
        names = d.feature_names if hasattr(d, "feature_names") else None
        p = write_csv(name, d.data, d.target, names, fmt="%.10g")
        record(name, p, "label", f"UCI via scikit-learn {loader.__name__}", "classification")

    for name, gen in [("blobs3", blobs3), ("gauss15", gauss15), ("ring15", ring15),
                      ("spirals", spirals), ("moons", moons)]:
        X, y = gen(rng)
        p = write_csv(name, X, y, ["x", "y"])
        record(name, p, "label", "synthetic (scripts/make_datasets.py)", "clustering-2d")

    manifest["heart_disease"] = {"path": None, "source": "https://archive.ics.uci.edu/dataset/45/heart+disease",
                                 "kind": "classification", "note": "not bundled; place a CSV here to enable"}
    manifest["autism"] = {"path": None, "source": "https://archive.ics.uci.edu/dataset/426/autism+screening+adult",
                          "kind": "classification", "note": "not bundled; place a CSV here to enable"}
    with open(OUT / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


if __name__ == "__main__":
    main()
