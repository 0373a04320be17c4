"""Admissible space-time test functions for the certificate integrals.

Scalar functions are cosine products in space: sampled at cell centers
they satisfy the mirror-ghost wall condition exactly (even symmetry about
every wall plane), so the discrete normal derivative vanishes to the last
bit.  Squaring the expansion yields the nonnegative family.

Solenoidal functions are discrete curls of a potential sampled on edges;
the divergence of such a field telescopes to zero identically and the
wall-normal faces carry exact zeros (potential factors vanish on wall
planes by construction).

Time dependence is the polynomial bump theta(t) = (1 - (t/t_cut)^2)^3 on
[0, t_cut], which is C^2 at the cut.  Residual evaluators never finite
difference theta: the phi_t pairings consume exact increments
theta(t_{k+1}) - theta(t_k), which integrate the analytic derivative.
"""

from dataclasses import dataclass, field

import numpy as np

from .fields import BC_NEUMANN, ScalarField, VectorField, div, face_diff


def bump_value(t, t_cut):
    s = t / t_cut
    if s >= 1.0:
        return 0.0
    return float((1.0 - s * s) ** 3)


def bump_derivative(t, t_cut):
    s = t / t_cut
    if s >= 1.0:
        return 0.0
    return float(-6.0 * s * (1.0 - s * s) ** 2 / t_cut)


@dataclass
class ScalarTestFunction:
    """Finite cosine expansion times a temporal bump.

    coeffs maps integer wavenumber tuples to amplitudes; the spatial part
    is sum_k a_k prod_d cos(pi k_d x_d / L_d), squared when nonnegative
    is set.  scale(t) multiplies the whole function (used for linear
    combinations without re-sampling).
    """

    coeffs: dict
    t_cut: float
    nonnegative: bool = False
    weight: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.t_cut > 0.0:
            raise ValueError("t_cut must be positive")
        if not self.coeffs:
            raise ValueError("expansion needs at least one term")

    @classmethod
    def random(cls, rng, *, ndim, t_cut, n_terms=3, max_wavenumber=3,
               nonnegative=False):
        coeffs = {}
        for _ in range(n_terms):
            k = tuple(int(rng.integers(0, max_wavenumber + 1))
                      for _ in range(ndim))
            coeffs[k] = coeffs.get(k, 0.0) + float(rng.uniform(-1.0, 1.0))
        return cls(coeffs=coeffs, t_cut=t_cut, nonnegative=nonnegative)

    def spatial(self, grid):
        """Cell field of the spatial factor, ghosts mirrored exactly."""
        key = grid
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        mesh = grid.cell_mesh(padded=True)
        total = np.zeros(tuple(d + 2 for d in grid.dims))
        for k, amp in self.coeffs.items():
            if len(k) != grid.ndim:
                raise ValueError("wavenumber arity does not match grid")
            term = np.full_like(total, amp)
            for d, kd in enumerate(k):
                term = term * np.cos(np.pi * kd * mesh[d] / grid.extents[d])
            total += term
        if self.nonnegative:
            total = total * total
        f = ScalarField(grid, total * self.weight, bc=BC_NEUMANN)
        # analytic ghosts already mirror the first interior plane; re-apply
        # to pin the equality bitwise
        f.apply_bc()
        self._cache[key] = f
        return f

    def theta(self, t):
        return bump_value(t, self.t_cut)

    def theta_dot(self, t):
        return bump_derivative(t, self.t_cut)

    def terms(self, grid):
        """List of (spatial ScalarField, theta callable, t_cut) triples."""
        return [(self.spatial(grid), self.theta, self.t_cut)]

    def wall_neumann_defect(self, grid):
        """Largest wall-normal difference, scaled by field magnitude."""
        f = self.spatial(grid)
        scale = max(float(np.max(np.abs(f.interior))), 1e-300)
        worst = 0.0
        nd = grid.ndim
        for k in range(nd):
            d = face_diff(f, k)
            lo = np.max(np.abs(np.take(d, 0, axis=k)))
            hi = np.max(np.abs(np.take(d, -1, axis=k)))
            worst = max(worst, float(lo), float(hi))
        return worst * min(grid.spacing) / scale


@dataclass
class CombinedScalarTestFunction:
    """Weighted sum of scalar test functions (for linearity checks)."""

    members: list

    def terms(self, grid):
        out = []
        for w, tf in self.members:
            for f, theta, t_cut in tf.terms(grid):
                scaled = ScalarField(grid, f.values * w, bc=BC_NEUMANN)
                out.append((scaled, theta, t_cut))
        return out


def _node_profile(n_cells, extent, k, power=3):
    """sin^power(pi k x / L) at the n_cells+1 node points, exact zeros at
    both walls (the mathematical value; avoids sin(pi k) dust)."""
    x = np.linspace(0.0, extent, n_cells + 1)
    s = np.sin(np.pi * k * x / extent) ** power
    s[0] = 0.0
    s[-1] = 0.0
    return s


def _center_profile(n_cells, extent, k):
    x = (np.arange(n_cells) + 0.5) * (extent / n_cells)
    return np.cos(np.pi * k * x / extent)


@dataclass
class SolenoidalTestFunction:
    """Divergence-free vector test function from a discrete potential.

    2D: psi = perp-gradient of a node potential W.  3D: psi = curl of an
    edge potential A.  Either way the discrete divergence telescopes to
    machine zero and wall-normal faces hold exact zeros.

    wavenumbers/amplitudes parametrize the potential components; in 2D a
    single component (W) is used.  power is the node-profile exponent
    sin^power: odd powers carry only odd harmonics and can be exactly
    orthogonal to sin^2-type flows on a box, so convergence studies that
    need a nonzero pairing should pick power=2.
    """

    amplitudes: tuple
    wavenumbers: tuple
    t_cut: float
    power: int = 3
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def random(cls, rng, *, ndim, t_cut, max_wavenumber=2):
        n_pot = 1 if ndim == 2 else 3
        amps = tuple(float(rng.uniform(-1.0, 1.0)) for _ in range(n_pot))
        waves = tuple(
            tuple(int(rng.integers(1, max_wavenumber + 1))
                  for _ in range(ndim))
            for _ in range(n_pot)
        )
        return cls(amplitudes=amps, wavenumbers=waves, t_cut=t_cut)

    def spatial(self, grid):
        key = grid
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if grid.ndim == 2:
            v = self._spatial_2d(grid)
        else:
            v = self._spatial_3d(grid)
        self._cache[key] = v
        return v

    def _spatial_2d(self, grid):
        nx, ny = grid.dims
        hx, hy = grid.spacing
        kx, ky = self.wavenumbers[0]
        w = self.amplitudes[0] * np.outer(
            _node_profile(nx, grid.extents[0], kx, power=self.power),
            _node_profile(ny, grid.extents[1], ky, power=self.power),
        )
        psi_x = (w[:, 1:] - w[:, :-1]) / hy
        psi_y = -(w[1:, :] - w[:-1, :]) / hx
        return VectorField.from_face_arrays(grid, [psi_x, psi_y])

    def _spatial_3d(self, grid):
        dims = grid.dims
        h = grid.spacing
        ext = grid.extents
        # edge potential component a_c: nodes transverse, centers along c
        pot = []
        for c in range(3):
            axes = []
            for d in range(3):
                if d == c:
                    axes.append(_center_profile(dims[d], ext[d],
                                                self.wavenumbers[c][d]))
                else:
                    axes.append(_node_profile(dims[d], ext[d],
                                              self.wavenumbers[c][d],
                                              power=self.power))
            a = self.amplitudes[c] * (
                axes[0][:, None, None]
                * axes[1][None, :, None]
                * axes[2][None, None, :]
            )
            pot.append(a)

        def delta(arr, axis, spacing):
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[axis] = slice(0, -1)
            hi[axis] = slice(1, None)
            return (arr[tuple(hi)] - arr[tuple(lo)]) / spacing

        faces = []
        for c in range(3):
            a, b = (c + 1) % 3, (c + 2) % 3
            faces.append(delta(pot[b], a, h[a]) - delta(pot[a], b, h[b]))
        return VectorField.from_face_arrays(grid, faces)

    def theta(self, t):
        return bump_value(t, self.t_cut)

    def terms(self, grid):
        return [(self.spatial(grid), self.theta, self.t_cut)]

    def divergence_defect(self, grid):
        """Max |div psi| scaled by max |psi| / min h."""
        v = self.spatial(grid)
        d = float(np.max(np.abs(div(v).interior)))
        scale = max(
            max(float(np.max(np.abs(v.face_values(k))))
                for k in range(grid.ndim)),
            1e-300,
        ) / min(grid.spacing)
        return d / scale
