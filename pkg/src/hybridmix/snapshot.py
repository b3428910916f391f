"""Versioned model snapshots.

Single JSON document per model, stable layout:

  mixture models  {"format": "hybridmix-snapshot", "version": 1,
                   "kind": "dpmm", "alpha": .., "beta": .., "vocab_size": ..,
                   "comp_doc_mass": [..],
                   "components": [{"n_k": .., "n_kw": {"word": count, ..}}, ..]}

  topic models    {... "kind": "hdp", "a": .., "alpha0": .., "beta": ..,
                   "vocab_size": .., "n_docs_total": .., "t": ..,
                   "m": [..], "pi": [..], "pi_rest": ..,
                   "N_kw": [[row mostly-zero floats], ..]}

Responsibilities are deliberately not stored; they are recomputable from a
corpus, and the held-out evaluators only need the global statistics above.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dcm import ComponentStats
from .hdplda import HdpHyper, HdpState
from .dpmm import DpmmHyper, DpmmState

FORMAT_NAME = "hybridmix-snapshot"
FORMAT_VERSION = 1


@dataclass
class DpmmSnapshot:
    alpha: float
    beta: float
    vocab_size: int
    comp_doc_mass: list[float]
    comp_stats: list[ComponentStats]

    @property
    def K(self) -> int:
        return len(self.comp_stats)


@dataclass
class HdpSnapshot:
    a: float
    alpha0: float
    beta: float
    vocab_size: int
    n_docs_total: int
    t: int
    m: np.ndarray
    pi: np.ndarray
    pi_rest: float
    N_kw: np.ndarray

    @property
    def K(self) -> int:
        return self.N_kw.shape[0]

    def to_state(self) -> HdpState:
        """Read-only state view for fold-in evaluation."""
        state = HdpState(self.vocab_size, self.n_docs_total, seed=0)
        state.N_kw = np.asarray(self.N_kw, dtype=np.float64)
        state.N_k = state.N_kw.sum(axis=1)
        state.m = np.asarray(self.m, dtype=np.float64)
        state.pi = np.asarray(self.pi, dtype=np.float64)
        state.pi_rest = float(self.pi_rest)
        state.t = self.t
        return state


def snapshot_dpmm(state: DpmmState, hyper: DpmmHyper) -> DpmmSnapshot:
    return DpmmSnapshot(
        alpha=hyper.alpha,
        beta=hyper.dcm.beta,
        vocab_size=hyper.dcm.vocab_size,
        comp_doc_mass=[float(m) for m in state.comp_doc_mass],
        comp_stats=[s.copy() for s in state.comp_stats],
    )


def snapshot_hdp(state: HdpState, hyper: HdpHyper) -> HdpSnapshot:
    return HdpSnapshot(
        a=hyper.a,
        alpha0=hyper.alpha0,
        beta=hyper.beta,
        vocab_size=state.vocab_size,
        n_docs_total=state.n_docs_total,
        t=state.t,
        m=state.m.copy(),
        pi=state.pi.copy(),
        pi_rest=state.pi_rest,
        N_kw=state.N_kw.copy(),
    )


def save_snapshot(snap: DpmmSnapshot | HdpSnapshot, path: str) -> None:
    if isinstance(snap, DpmmSnapshot):
        payload = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "kind": "dpmm",
            "alpha": snap.alpha,
            "beta": snap.beta,
            "vocab_size": snap.vocab_size,
            "comp_doc_mass": snap.comp_doc_mass,
            "components": [
                {"n_k": s.n_k, "n_kw": {str(w): v for w, v in sorted(s.n_kw.items())}}
                for s in snap.comp_stats
            ],
        }
    else:
        payload = {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "kind": "hdp",
            "a": snap.a,
            "alpha0": snap.alpha0,
            "beta": snap.beta,
            "vocab_size": snap.vocab_size,
            "n_docs_total": snap.n_docs_total,
            "t": snap.t,
            "m": snap.m.tolist(),
            "pi": snap.pi.tolist(),
            "pi_rest": snap.pi_rest,
            "N_kw": snap.N_kw.tolist(),
        }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")


def load_snapshot(path: str) -> DpmmSnapshot | HdpSnapshot:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {payload.get('version')}")
    kind = payload.get("kind")
    if kind == "dpmm":
        stats = []
        for comp in payload["components"]:
            s = ComponentStats({int(w): float(v) for w, v in comp["n_kw"].items()})
            s.n_k = float(comp["n_k"])
            stats.append(s)
        return DpmmSnapshot(
            alpha=float(payload["alpha"]),
            beta=float(payload["beta"]),
            vocab_size=int(payload["vocab_size"]),
            comp_doc_mass=[float(x) for x in payload["comp_doc_mass"]],
            comp_stats=stats,
        )
    if kind == "hdp":
        n_kw = np.asarray(payload["N_kw"], dtype=np.float64)
        if n_kw.size == 0:
            n_kw = n_kw.reshape(0, int(payload["vocab_size"]))
        return HdpSnapshot(
            a=float(payload["a"]),
            alpha0=float(payload["alpha0"]),
            beta=float(payload["beta"]),
            vocab_size=int(payload["vocab_size"]),
            n_docs_total=int(payload["n_docs_total"]),
            t=int(payload["t"]),
            m=np.asarray(payload["m"], dtype=np.float64),
            pi=np.asarray(payload["pi"], dtype=np.float64),
            pi_rest=float(payload["pi_rest"]),
            N_kw=n_kw,
        )
    raise ValueError(f"{path}: unknown snapshot kind {kind!r}")
