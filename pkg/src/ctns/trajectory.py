"""Stored space-time trajectories for certificate evaluation.

A record holds uniformly spaced snapshots of (n, c, u) plus the model
parameters and the potential; snapshot zero is the configured initial
data.  Records round-trip through a directory of field dumps plus a JSON
manifest.  Optional per-equation source callbacks (used by manufactured
runs) live only in memory and are never persisted.
"""

import json
import os

import numpy as np

from .errors import DomainError, SupportMismatch
from .fieldio import read_binary, write_binary

_TIME_RTOL = 1e-9


class TrajectoryRecord:
    """Uniform-in-time snapshot sequence of one simulation."""

    def __init__(self, grid, m, epsilon, phi=None):
        self.grid = grid
        self.m = m
        self.epsilon = epsilon
        self.phi = phi
        self.times = []
        self.n = []
        self.c = []
        self.u = []
        # sources: optional dict with keys "n", "c", "u"; values are
        # callables t -> interior/face arrays (in-memory only)
        self.sources = None

    def append(self, t, n, c, u):
        if n.grid != self.grid or c.grid != self.grid or u.grid != self.grid:
            raise DomainError("snapshot grid does not match record grid")
        if self.times and not t > self.times[-1]:
            raise DomainError("snapshot times must increase strictly")
        self.times.append(float(t))
        self.n.append(n)
        self.c.append(c)
        self.u.append(u)

    def __len__(self):
        return len(self.times)

    @property
    def dt_out(self):
        if len(self.times) < 2:
            raise DomainError("record needs at least two snapshots")
        return self.times[1] - self.times[0]

    def check_uniform(self):
        dt = self.dt_out
        gaps = np.diff(np.asarray(self.times))
        if np.max(np.abs(gaps - dt)) > _TIME_RTOL * max(dt, 1.0):
            raise DomainError("snapshot spacing is not uniform")
        return dt

    def require_support(self, t_cut):
        """A test function supported in [0, t_cut] needs the record to
        start at zero and reach the cut."""
        if not self.times:
            raise SupportMismatch("empty trajectory record")
        if abs(self.times[0]) > _TIME_RTOL:
            raise SupportMismatch("record does not start at t = 0")
        if self.times[-1] < t_cut - _TIME_RTOL:
            raise SupportMismatch(
                f"record ends at {self.times[-1]}, before the cut {t_cut}"
            )
        self.check_uniform()

    def snapshot_index(self, t):
        ts = np.asarray(self.times)
        i = int(np.argmin(np.abs(ts - t)))
        if abs(ts[i] - t) > _TIME_RTOL * max(1.0, abs(t)):
            raise DomainError(f"{t} is not a snapshot instant")
        return i

    # -- persistence --------------------------------------------------

    def save(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        entries = []
        for i, t in enumerate(self.times):
            names = {
                "t": t,
                "n": f"n_{i:05d}.fld",
                "c": f"c_{i:05d}.fld",
                "u": f"u_{i:05d}.fld",
            }
            write_binary(os.path.join(outdir, names["n"]), self.n[i], t)
            write_binary(os.path.join(outdir, names["c"]), self.c[i], t)
            write_binary(os.path.join(outdir, names["u"]), self.u[i], t)
            entries.append(names)
        manifest = {
            "format": "ctns-trajectory-1",
            "m": self.m,
            "epsilon": self.epsilon,
            "dims": list(self.grid.dims),
            "extents": list(self.grid.extents),
            "snapshots": entries,
            "phi": None,
        }
        if self.phi is not None:
            manifest["phi"] = "phi.fld"
            write_binary(os.path.join(outdir, "phi.fld"), self.phi, 0.0)
        with open(os.path.join(outdir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)

    @classmethod
    def load(cls, indir):
        with open(os.path.join(indir, "manifest.json")) as fh:
            manifest = json.load(fh)
        if manifest.get("format") != "ctns-trajectory-1":
            raise DomainError(f"{indir}: unknown trajectory format")
        phi = None
        if manifest.get("phi"):
            phi, _ = read_binary(os.path.join(indir, manifest["phi"]))
        rec = None
        for entry in manifest["snapshots"]:
            n, t_n = read_binary(os.path.join(indir, entry["n"]))
            c, _ = read_binary(os.path.join(indir, entry["c"]))
            u, _ = read_binary(os.path.join(indir, entry["u"]))
            if rec is None:
                rec = cls(n.grid, manifest["m"], manifest["epsilon"], phi)
            rec.append(entry["t"], n, c, u)
        if rec is None:
            raise DomainError(f"{indir}: manifest lists no snapshots")
        return rec


def steady_constant_record(grid, *, n_value, c_value, m, epsilon, phi=None,
                           t_end=2.0, n_snapshots=21):
    """Synthetic record of an exact steady state (classical solution when
    n = c: every weak identity holds with equality)."""
    from .fields import ScalarField, VectorField

    rec = TrajectoryRecord(grid, m, epsilon, phi)
    times = np.linspace(0.0, t_end, n_snapshots)
    n0 = ScalarField.full(grid, n_value).apply_bc()
    c0 = ScalarField.full(grid, c_value).apply_bc()
    u0 = VectorField.zeros(grid).apply_bc()
    for t in times:
        rec.append(float(t), n0, c0, u0)
    return rec
