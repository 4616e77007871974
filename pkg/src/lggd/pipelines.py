"""Feature-generating pipelines: GGD (default init), LGGD (learned init),
and dynamic inclusion of new labels."""

import hashlib
import json
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import LabelOutOfRange, OverlapWithBoundary
from .graph import INFINITY_CAP, potential_eval
from .learn import mlp_forward
from .solver import BoundarySpec, integrate, reachable_mask, with_clamping


@dataclass
class FeatureMatrix:
    """n x (K*T) snapshot distances, columns class-major then snapshot."""

    values: np.ndarray
    n_classes: int
    snapshot_times: tuple

    @property
    def n_snapshots(self):
        return len(self.snapshot_times)

    def column(self, k, ti):
        return self.values[:, k * self.n_snapshots + ti]

    def column_names(self):
        return [
            f"f_c{k}_t{t:g}"
            for k in range(self.n_classes)
            for t in self.snapshot_times
        ]


def _assemble(fld, g, boundary):
    K, T, n = fld.values.shape
    values = np.empty((n, K * T))
    for k in range(K):
        for ti in range(T):
            values[:, k * T + ti] = np.minimum(fld.values[k, ti], INFINITY_CAP)
    unreachable = set()
    for cls in boundary.classes:
        if cls:
            unreachable.update(np.flatnonzero(~reachable_mask(g, cls)).tolist())
    if unreachable:
        listed = sorted(unreachable)
        warnings.warn(
            f"{len(listed)} nodes unreachable from some class boundary keep the "
            f"cap value {INFINITY_CAP:g}: {listed[:10]}{'...' if len(listed) > 10 else ''}"
        )
    return FeatureMatrix(values=values, n_classes=K, snapshot_times=fld.snapshot_times)


def _default_phi0(n_nodes, boundary):
    phi0 = np.full((boundary.n_classes, n_nodes), INFINITY_CAP)
    for k, cls in enumerate(boundary.classes):
        phi0[k, list(cls)] = 0.0
    return phi0


def generate_ggd(g, boundary, pot, cfg):
    """Pipeline0: clamped integration from the Dijkstra-style default init."""
    rho = potential_eval(g, pot)
    fld = integrate(g, boundary, rho, _default_phi0(g.n_nodes, boundary),
                    with_clamping(cfg, True))
    return _assemble(fld, g, boundary)


def generate_lggd(g, boundary, features, mlp, pot, cfg):
    """Pipeline2: clamped integration from the learned MLP init (0 on boundary)."""
    rho = potential_eval(g, pot)
    phi0 = mlp_forward(mlp, features)
    for k, cls in enumerate(boundary.classes):
        phi0[k, list(cls)] = 0.0
    fld = integrate(g, boundary, rho, phi0, with_clamping(cfg, True))
    return _assemble(fld, g, boundary)


def include_new_labels(g, boundary, new_labels, features, mlp, pot, cfg):
    """Enlarge the boundary with labeled nodes V1 and regenerate features
    with the unchanged learned parameters."""
    if new_labels.n_classes != boundary.n_classes:
        raise LabelOutOfRange(
            f"new labels span {new_labels.n_classes} classes, boundary has "
            f"{boundary.n_classes}"
        )
    existing = set(boundary.all_nodes)
    overlap = existing.intersection(new_labels.all_nodes)
    if overlap:
        raise OverlapWithBoundary(f"nodes {sorted(overlap)} already on the boundary")
    merged = BoundarySpec(tuple(
        tuple(sorted((*b, *v)))
        for b, v in zip(boundary.classes, new_labels.classes)
    ))
    return generate_lggd(g, merged, features, mlp, pot, cfg)


def boundary_hash(boundary):
    blob = json.dumps([sorted(cls) for cls in boundary.classes]).encode()
    return hashlib.sha256(blob).hexdigest()


def save_features(fm, path, boundary=None):
    """Feature CSV plus a `<path>.meta.json` sidecar."""
    names = ",".join(fm.column_names())
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"node,{names}\n")
        for x in range(fm.values.shape[0]):
            row = ",".join(repr(float(v)) for v in fm.values[x])
            fh.write(f"{x},{row}\n")
    os.replace(tmp, path)
    meta = {
        "n_classes": fm.n_classes,
        "n_snapshots": fm.n_snapshots,
        "snapshot_times": list(fm.snapshot_times),
        "boundary_sha256": None if boundary is None else boundary_hash(boundary),
    }
    sidecar = f"{path}.meta.json"
    with open(f"{sidecar}.tmp", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
    os.replace(f"{sidecar}.tmp", sidecar)


def load_features(path):
    values = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)[:, 1:]
    with open(f"{path}.meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    return FeatureMatrix(
        values=values,
        n_classes=meta["n_classes"],
        snapshot_times=tuple(meta["snapshot_times"]),
    )


def zscore(fm):
    """Optional column standardization (off by default everywhere)."""
    mu = fm.values.mean(axis=0)
    sd = fm.values.std(axis=0)
    sd[sd == 0] = 1.0
    return FeatureMatrix(
        values=(fm.values - mu) / sd,
        n_classes=fm.n_classes,
        snapshot_times=fm.snapshot_times,
    )
