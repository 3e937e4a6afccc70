"""Readers for the engine's emitted file formats.

These parse the documented external formats directly (CSV tables, NDJSON
chains, JSON summaries/manifests); nothing here imports the engine.
"""

import json

import numpy as np


class FormatError(ValueError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


def read_chain(path):
    """Chain NDJSON -> dict of arrays (iteration, accept, phi, sigma2, p0, nu)."""
    iterations = []
    accepts = []
    phis = []
    sigma2s = []
    p0s = []
    nus = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            for key in ("iteration", "accept", "phi", "sigma2", "p0", "nu"):
                if key not in obj:
                    raise FormatError(key, f"missing field in chain record of {path}")
            iterations.append(obj["iteration"])
            accepts.append(bool(obj["accept"]))
            phis.append(float(obj["phi"]))
            sigma2s.append(float(obj["sigma2"]))
            p0s.append(obj["p0"])
            nus.append(obj["nu"])
    if not iterations:
        raise FormatError("records", f"chain file {path} holds no records")
    return {
        "iteration": np.array(iterations),
        "accept": np.array(accepts),
        "phi": np.array(phis),
        "sigma2": np.array(sigma2s),
        "p0": np.array(p0s),
        "nu": np.array(nus),
    }


def _read_table(path, required):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for col in required:
            if col not in header:
                raise FormatError(col, f"missing column in {path}")
        idx = {c: header.index(c) for c in header}
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return idx, rows


def read_observations(path):
    idx, rows = _read_table(path, ("index", "s", "x", "y"))
    s = np.array([float(r[idx["s"]]) for r in rows])
    pts = np.array([[float(r[idx["x"]]), float(r[idx["y"]])] for r in rows])
    sigma2 = None
    if "sigma2" in idx:
        sigma2 = np.array([float(r[idx["sigma2"]]) for r in rows])
    return s, pts, sigma2


def read_shapes(path):
    idx, rows = _read_table(path, ("sample", "s", "x", "y"))
    ks = np.array([int(r[idx["sample"]]) for r in rows])
    s = np.array([float(r[idx["s"]]) for r in rows])
    pts = np.array([[float(r[idx["x"]]), float(r[idx["y"]])] for r in rows])
    count = ks.max() + 1
    per = len(rows) // count
    return s[:per], pts.reshape(count, per, 2)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def read_truth(path):
    blob = read_json(path)
    for key in ("n_p", "p0_values", "nu_values"):
        if key not in blob:
            raise FormatError(key, f"missing field in {path}")
    return blob


def prior_mode_std(manifest, field, mode_index):
    """Prior standard deviation of one chain coefficient from the manifest.

    Coefficient slots follow [a_0, a_1, b_1, a_2, b_2, ...]; slot j carries
    wavenumber (j + 1) // 2.
    """
    params = manifest["params"][f"prior.{field}"]
    k = (mode_index + 1) // 2
    return float(
        np.sqrt(params["delta"]) * (1.0 + params["ell"] ** 2 * k * k) ** (-params["alpha"] / 2.0)
    )
