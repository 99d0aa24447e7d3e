"""Versioned on-disk format for trained estimates.

An artifact is a single ``.npz`` holding the sample arrays, their values, the
latent Q-table and a JSON metadata string (format version, environment,
solver config, Lipschitz profile).
"""

from __future__ import annotations

import json

import numpy as np

from .envs import make_env
from .errors import ArtifactVersionMismatch
from .latent import LatentQTable, LipschitzProfile
from .solver import QEstimate, SolverConfig

FORMAT = "bcpace-estimate"
FORMAT_VERSION = 1


def save_estimate(path, qe: QEstimate, env_name, env_params, extra=None):
    n = qe.samples.n
    ss = qe.samples
    meta = {
        "format": FORMAT,
        "version": FORMAT_VERSION,
        "environment": {"name": env_name, "params": env_params},
        "config": qe.config.to_dict(),
        "profile": qe.profile.to_dict(),
        "latent": None,
        "extra": extra or {},
    }
    arrays = dict(S=ss.S[:n], B=ss.B[:n], A=ss.A[:n], R=ss.R[:n], S2=ss.S2[:n], B2=ss.B2[:n],
                  T=ss.T[:n], Q=ss.Q[:n])
    if qe.latent_q is not None:
        lq = qe.latent_q
        meta["latent"] = {"gamma": lq.gamma, "tol": lq.tol, "vi_residual": lq.vi_residual,
                          "continuing": lq.continuing}
        arrays["latent_values"] = lq.values
    with open(path, "wb") as fh:
        np.savez(fh, meta=json.dumps(meta, sort_keys=True), **arrays)


def load_estimate(path) -> QEstimate:
    """Rebuild a frozen estimate; raises ArtifactVersionMismatch on format drift."""
    with np.load(path, allow_pickle=False) as data:
        try:
            meta = json.loads(str(data["meta"]))
        except KeyError:
            raise ArtifactVersionMismatch(f"{path} is not an estimate artifact") from None
        if meta.get("format") != FORMAT or meta.get("version") != FORMAT_VERSION:
            raise ArtifactVersionMismatch(
                f"{path}: format {meta.get('format')} v{meta.get('version')}, "
                f"expected {FORMAT} v{FORMAT_VERSION}"
            )
        arrays = {k: data[k] for k in data.files if k != "meta"}
    env = meta["environment"]
    model = make_env(env["name"], env["params"])
    config = SolverConfig(**meta["config"])
    profile = LipschitzProfile(**meta["profile"])
    latent = None
    if meta["latent"] is not None:
        latent = LatentQTable(model=model, values=arrays["latent_values"], **meta["latent"])
    qe = QEstimate(model, config, profile, latent)
    for i in range(arrays["Q"].size):
        qe.add_sample(
            model.vector_state(arrays["S"][i]),
            arrays["B"][i],
            int(arrays["A"][i]),
            float(arrays["R"][i]),
            model.vector_state(arrays["S2"][i]),
            arrays["B2"][i],
            bool(arrays["T"][i]),
        )
    qe.samples.Q[: qe.samples.n] = arrays["Q"]
    qe.env_name = env["name"]
    qe.env_params = env["params"]
    return qe.freeze()
