"""Discrete network energy and its gradient with respect to nodal positions.

The total energy sums, per element, the pair potential over every distinct
vertex pair of the element (an edge shared by k elements is counted k
times, as the model prescribes), weighted either by h^dim or by the element
volume, plus the exact per-element volumetric contribution of the
piecewise-affine deformation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .chains import PairPotential
from .meshing import Mesh, boundary_layer
from .volumetric import NonPositiveJacobianError, VolumetricParams, w_vol_eta_j

UNIFORM_WEIGHTS = "uniform-h"
VOLUME_WEIGHTS = "element-volume"


class InvertedElementError(ValueError):
    """An element has non-positive deformed volume and no cut-off is active."""


class CoincidentVerticesError(ValueError):
    """Two deformed vertices of a pair coincide; the stretch direction is undefined."""


class FullyConstrainedError(ValueError):
    """A boundary condition pins every degree of freedom."""


@dataclass(frozen=True)
class EnergyModel:
    """Pair potential, chains-per-volume factor f, optional volumetric term,
    and the element weighting convention for the pair sum."""

    pair: PairPotential
    f: float = 1.0
    vol: VolumetricParams | None = None
    weight_mode: str = UNIFORM_WEIGHTS

    def __post_init__(self):
        if not self.f > 0.0:
            raise ValueError("chains-per-volume factor f must be positive")
        if self.weight_mode not in (UNIFORM_WEIGHTS, VOLUME_WEIGHTS):
            raise ValueError(f"unknown weight mode {self.weight_mode!r}")


@dataclass(frozen=True)
class BoundaryCondition:
    """Displacement boundary data.

    affine-layer pins every vertex within `depth` of the unit-box boundary to
    xi @ x; dirichlet-face-free-traction pins only vertices on the named box
    faces ("x-", "x+", "y-", ...) to xi @ x, leaving the rest traction-free.
    """

    kind: str
    xi: np.ndarray
    depth: float | None = None
    faces: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float))
        if not np.all(np.isfinite(self.xi)):
            raise ValueError("macroscopic gradient must be finite")
        if self.kind == "affine-layer":
            if self.depth is None or self.depth < 0.0:
                raise ValueError("affine-layer needs a nonnegative depth")
        elif self.kind == "dirichlet-face-free-traction":
            if not self.faces:
                raise ValueError("dirichlet-face-free-traction needs face names")
        else:
            raise ValueError(f"unknown boundary condition kind {self.kind!r}")


def _pair_data(mesh: Mesh):
    """Per-mesh geometry cache: pair index arrays, rest lengths, element
    matrices for the deformation gradient."""
    cache = mesh._cache
    if "pairs" in cache:
        return cache["pairs"]
    dim = mesh.dim
    combos = list(itertools.combinations(range(dim + 1), 2))
    elements = mesh.elements
    i_idx = np.concatenate([elements[:, a] for a, _ in combos])
    j_idx = np.concatenate([elements[:, b] for _, b in combos])
    rest = np.linalg.norm(mesh.vertices[i_idx] - mesh.vertices[j_idx], axis=1)
    if np.any(rest == 0.0):
        raise ValueError("mesh contains zero-length reference edges")
    p = mesh.vertices[elements]
    xmat = np.swapaxes(p[:, 1:, :] - p[:, :1, :], 1, 2)  # columns x_k - x_0
    det_x = np.linalg.det(xmat)
    data = {
        "n_pairs": len(combos),
        "i": i_idx,
        "j": j_idx,
        "rest": rest,
        "xinv": np.linalg.inv(xmat),
        "det_x": det_x,
        "volumes": mesh.element_volumes(),
    }
    cache["pairs"] = data
    return data


def _element_weights(mesh: Mesh, model: EnergyModel) -> np.ndarray:
    if model.weight_mode == UNIFORM_WEIGHTS:
        # h^dim = 1/N_el exactly, by the definition of the mesh scale
        return np.full(mesh.num_elements, 1.0 / mesh.num_elements)
    return _pair_data(mesh)["volumes"]


def _deformed_jacobians(mesh: Mesh, positions: np.ndarray):
    data = _pair_data(mesh)
    q = positions[mesh.elements]
    vmat = np.swapaxes(q[:, 1:, :] - q[:, :1, :], 1, 2)
    return np.linalg.det(vmat) / data["det_x"], vmat


def _volumetric_jacobians_checked(mesh: Mesh, positions: np.ndarray, vol: VolumetricParams):
    jac, vmat = _deformed_jacobians(mesh, positions)
    if vol.eta == 0.0 and np.any(jac <= 0.0):
        bad = int(np.flatnonzero(jac <= 0.0)[0])
        raise InvertedElementError(
            f"element {bad} is inverted (det = {jac[bad]:g}) and no cut-off is active"
        )
    return jac, vmat


def element_energies(mesh: Mesh, positions: np.ndarray, model: EnergyModel) -> np.ndarray:
    """Per-element energies; their sum is the total energy."""
    positions = np.asarray(positions, dtype=float)
    data = _pair_data(mesh)
    delta = positions[data["i"]] - positions[data["j"]]
    stretch = np.linalg.norm(delta, axis=1) / data["rest"]
    pair_w = np.asarray(model.pair.energy(stretch), dtype=float)
    per_elem = model.f * pair_w.reshape(data["n_pairs"], mesh.num_elements).sum(axis=0)
    energies = _element_weights(mesh, model) * per_elem
    if model.vol is not None:
        jac, _ = _volumetric_jacobians_checked(mesh, positions, model.vol)
        energies = energies + data["volumes"] * w_vol_eta_j(jac, model.vol)
    return energies


def total_energy(mesh: Mesh, positions: np.ndarray, model: EnergyModel) -> float:
    """Total network energy of the deformed positions."""
    return float(element_energies(mesh, positions, model).sum())


def energy_gradient(mesh: Mesh, positions: np.ndarray, model: EnergyModel) -> np.ndarray:
    """Exact analytic gradient of total_energy, one d-vector per vertex."""
    positions = np.asarray(positions, dtype=float)
    data = _pair_data(mesh)
    grad = np.zeros_like(positions)

    delta = positions[data["i"]] - positions[data["j"]]
    dist = np.linalg.norm(delta, axis=1)
    if np.any(dist == 0.0):
        raise CoincidentVerticesError(
            "coincident deformed vertices: stretch-ratio derivative undefined"
        )
    stretch = dist / data["rest"]
    dW = np.asarray(model.pair.derivative(stretch), dtype=float)
    weights = np.tile(_element_weights(mesh, model), data["n_pairs"])
    coef = weights * model.f * dW / (data["rest"] * dist)
    contrib = coef[:, None] * delta
    np.add.at(grad, data["i"], contrib)
    np.add.at(grad, data["j"], -contrib)

    if model.vol is not None:
        vol = model.vol
        jac, vmat = _volumetric_jacobians_checked(mesh, positions, vol)
        active = jac > vol.eta if vol.eta > 0.0 else np.ones_like(jac, dtype=bool)
        if np.any(active):
            xinv = data["xinv"][active]
            f_def = vmat[active] @ xinv
            cof = _cofactor_batch(f_def)
            scale = 0.25 * vol.K * (2.0 * jac[active] - 1.0 / jac[active])
            g_vol = scale[:, None, None] * cof
            moment = (
                data["volumes"][active, None, None] * g_vol @ np.swapaxes(xinv, 1, 2)
            )
            els = mesh.elements[active]
            for k in range(mesh.dim):
                np.add.at(grad, els[:, k + 1], moment[:, :, k])
            np.add.at(grad, els[:, 0], -moment.sum(axis=2))
    return grad


def _cofactor_batch(f: np.ndarray) -> np.ndarray:
    d = f.shape[-1]
    if d == 2:
        cof = np.empty_like(f)
        cof[:, 0, 0] = f[:, 1, 1]
        cof[:, 0, 1] = -f[:, 1, 0]
        cof[:, 1, 0] = -f[:, 0, 1]
        cof[:, 1, 1] = f[:, 0, 0]
        return cof
    cof = np.empty_like(f)
    cof[:, :, 0] = np.cross(f[:, :, 1], f[:, :, 2])
    cof[:, :, 1] = np.cross(f[:, :, 2], f[:, :, 0])
    cof[:, :, 2] = np.cross(f[:, :, 0], f[:, :, 1])
    return cof


_FACE_AXES = {"x": 0, "y": 1, "z": 2}


def apply_bc(mesh: Mesh, bc: BoundaryCondition, face_tol: float = 1e-12):
    """Resolve a boundary condition into (fixed mask, fixed target positions).

    Raises FullyConstrainedError when nothing is left to minimize.
    """
    if bc.xi.shape != (mesh.dim, mesh.dim):
        raise ValueError("macroscopic gradient does not match the mesh dimension")
    targets = mesh.vertices @ bc.xi.T
    if bc.kind == "affine-layer":
        mask = mesh.boundary_flags <= bc.depth
    else:
        mask = np.zeros(mesh.num_vertices, dtype=bool)
        for face in bc.faces:
            axis_name, side = face[0], face[1:]
            if axis_name not in _FACE_AXES or side not in ("-", "+"):
                raise ValueError(f"unknown face name {face!r}")
            axis = _FACE_AXES[axis_name]
            if axis >= mesh.dim:
                raise ValueError(f"face {face!r} out of range for dim {mesh.dim}")
            value = 0.0 if side == "-" else 1.0
            mask |= np.abs(mesh.vertices[:, axis] - value) <= face_tol
    if mask.all():
        raise FullyConstrainedError("boundary condition pins every vertex")
    values = np.where(mask[:, None], targets, 0.0)
    return mask, values


def affine_positions(mesh: Mesh, xi: np.ndarray) -> np.ndarray:
    """Positions of the homogeneous deformation x -> xi @ x."""
    xi = np.asarray(xi, dtype=float)
    return mesh.vertices @ xi.T


def pinned_layer_state(mesh: Mesh, xi: np.ndarray, depth: float):
    """Affine state together with the layer mask used by cell problems."""
    mask = np.zeros(mesh.num_vertices, dtype=bool)
    mask[boundary_layer(mesh, depth)] = True
    return mask, affine_positions(mesh, xi)
