"""Referee multiport circuits.

Ideal transfer matrices and elementary-element layouts for the four circuit
designs (optimal tree, extendable chain, and generalized beamsplitters via
triangular Reck or rectangular Clements meshes), plus composition of layouts
back into matrices and decomposition of arbitrary unitaries into meshes.

Conventions used throughout:

* A transfer matrix is a dense complex ``(K, K)`` ndarray mapping input
  amplitudes to output amplitudes, ``b = T @ a``.
* Every unbalanced beamsplitter is embedded per the single 2x2 convention

      [[ sqrt(t),        sqrt(1 - t)],
       [-sqrt(1 - t),    sqrt(t)    ]]

  acting on ports ``(l_min, l_max)``, i.e. the minus sign sits in the
  ``(l_max, l_min)`` slot.
* Phase shifters are free-standing single-port elements; decompositions
  keep their residual output phases as explicit elements so that the
  reconstruction is exact, not merely exact up to output phases.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DecompositionError, InvalidDimensionError, LayoutError

UNBALANCED_BS = "unbalanced-beamsplitter"
SYMMETRIC_BS = "symmetric-beamsplitter"
PHASE_SHIFTER = "phase-shifter"

DESIGN_OPTIMAL = "optimal-tree"
DESIGN_EXTENDABLE = "extendable"
DESIGN_RECK = "generalized-bs-reck"
DESIGN_CLEMENTS = "generalized-bs-clements"
DESIGNS = (DESIGN_OPTIMAL, DESIGN_EXTENDABLE, DESIGN_CLEMENTS, DESIGN_RECK)

_UNITARITY_TOL = 1e-10


def _check_dim(k: int) -> None:
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise InvalidDimensionError(f"multiport dimension must be an integer >= 2, got {k!r}")


class CircuitElement(NamedTuple):
    """One elementary optical element (immutable).

    ``ports`` are 1-based; beamsplitters carry ``(l_min, l_max)`` with
    ``l_min < l_max``, phase shifters a single port.  ``t`` is the power
    transmittance of a beamsplitter, ``phase`` the shift in radians.
    ``layer`` is the 0-based position along the optical depth.
    """

    kind: str
    ports: tuple[int, ...]
    t: float | None = None
    phase: float | None = None
    layer: int = 0

    @property
    def omega(self) -> float | None:
        """Internal shifter angle of an unbalanced beamsplitter, t = sin^2(omega)."""
        if self.kind == UNBALANCED_BS:
            return math.asin(math.sqrt(self.t))
        return self.phase


@dataclass(frozen=True)
class CircuitLayout:
    """Ordered list of circuit elements plus design metadata.

    ``output_perm``, when present, relabels the raw composed product:
    output ``i`` of the circuit is row ``output_perm[i]`` (0-based) of the
    raw element product.  The extendable chain needs this because its
    conventional matrix presentation lists the photon-keeping output last,
    which no product of the fixed 2x2 blocks can produce directly.
    """

    dim: int
    design: str
    elements: tuple[CircuitElement, ...]
    output_perm: tuple[int, ...] | None = None

    @property
    def bs_count(self) -> int:
        return sum(1 for e in self.elements if e.kind in (UNBALANCED_BS, SYMMETRIC_BS))

    @property
    def optical_depth(self) -> int:
        """Maximum number of beamsplitters on any input->output path."""
        depth = [0] * self.dim
        for e in self.elements:
            if e.kind in (UNBALANCED_BS, SYMMETRIC_BS):
                a, b = e.ports[0] - 1, e.ports[1] - 1
                d = max(depth[a], depth[b]) + 1
                depth[a] = depth[b] = d
        return max(depth) if depth else 0


def dft_multiport(k: int) -> np.ndarray:
    """Discrete-Fourier multiport: u_ij = exp(2*pi*i*(i-1)(j-1)/K)/sqrt(K)."""
    _check_dim(k)
    idx = np.arange(k)
    return np.exp(2j * np.pi * np.outer(idx, idx) / k) / math.sqrt(k)


def extendable_matrix(k: int) -> np.ndarray:
    """Closed-form matrix of the extendable chain design.

    Row j (1-based, j < K) holds ``-1/sqrt((j+1)j)`` in columns 1..j and
    ``sqrt(j/(j+1))`` in column j+1; the last row is uniformly 1/sqrt(K).
    """
    _check_dim(k)
    m = np.zeros((k, k))
    for j in range(1, k):
        m[j - 1, :j] = -1.0 / math.sqrt((j + 1) * j)
        m[j - 1, j] = math.sqrt(j / (j + 1))
    m[k - 1, :] = 1.0 / math.sqrt(k)
    return m.astype(complex)


def extendable_layout(k: int) -> CircuitLayout:
    """Chain of K-1 unbalanced beamsplitters with t_k = (k-1)/k."""
    _check_dim(k)
    elements = tuple(
        CircuitElement(UNBALANCED_BS, (1, j), t=(j - 1) / j, layer=j - 2)
        for j in range(2, k + 1)
    )
    # The raw chain product keeps the photon-gaining bus on output 1; the
    # conventional presentation lists it last.
    perm = tuple(range(1, k)) + (0,)
    return CircuitLayout(dim=k, design=DESIGN_EXTENDABLE, elements=elements, output_perm=perm)


def optimal_tree_layout(k: int) -> CircuitLayout:
    """Binary-tree layout with K-1 beamsplitters and depth ceil(log2 K).

    Labels are split recursively into a ceil-half and a floor-half group;
    the beamsplitter joining two groups of total size n has transmittance
    ceil(n/2)/n and connects the first labels of the two groups.  The
    photon-keeping output is port 1.
    """
    _check_dim(k)
    elements: list[CircuitElement] = []

    def split(labels: tuple[int, ...]) -> int:
        n = len(labels)
        if n == 1:
            return 0
        n_hi = -(-n // 2)
        first, second = labels[:n_hi], labels[n_hi:]
        d = max(split(first), split(second))
        elements.append(
            CircuitElement(UNBALANCED_BS, (first[0], second[0]), t=n_hi / n, layer=d)
        )
        return d + 1

    split(tuple(range(1, k + 1)))
    return CircuitLayout(dim=k, design=DESIGN_OPTIMAL, elements=tuple(elements))


def _validate_element(el: CircuitElement, k: int) -> None:
    if el.kind == PHASE_SHIFTER:
        if len(el.ports) != 1 or not 1 <= el.ports[0] <= k:
            raise LayoutError(f"phase shifter port out of range: {el.ports}")
        if el.phase is None:
            raise LayoutError("phase shifter without a phase value")
        return
    if el.kind in (UNBALANCED_BS, SYMMETRIC_BS):
        if len(el.ports) != 2:
            raise LayoutError(f"beamsplitter needs two ports, got {el.ports}")
        a, b = el.ports
        if not (1 <= a < b <= k):
            raise LayoutError(f"beamsplitter ports out of range or unordered: {el.ports}")
        if el.kind == UNBALANCED_BS and not (el.t is not None and 0.0 <= el.t <= 1.0):
            raise LayoutError(f"power transmittance outside [0, 1]: {el.t}")
        return
    raise LayoutError(f"unknown element kind: {el.kind!r}")


def compose_layout(layout: CircuitLayout) -> np.ndarray:
    """Ordered product of the embedded element matrices, first element first."""
    k = layout.dim
    m = np.eye(k, dtype=complex)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for el in layout.elements:
        _validate_element(el, k)
        if el.kind == UNBALANCED_BS:
            a, b = el.ports[0] - 1, el.ports[1] - 1
            st = math.sqrt(el.t)
            sr = math.sqrt(1.0 - el.t)
            ra = m[a].copy()
            m[a] = st * ra + sr * m[b]
            m[b] = -sr * ra + st * m[b]
        elif el.kind == SYMMETRIC_BS:
            a, b = el.ports[0] - 1, el.ports[1] - 1
            ra = m[a].copy()
            m[a] = inv_sqrt2 * (ra + 1j * m[b])
            m[b] = inv_sqrt2 * (1j * ra + m[b])
        else:
            m[el.ports[0] - 1] *= cmath.exp(1j * el.phase)
    if layout.output_perm is not None:
        if sorted(layout.output_perm) != list(range(k)):
            raise LayoutError(f"output_perm is not a permutation of 0..{k - 1}")
        m = m[list(layout.output_perm)]
    return m


def _check_unitary(u: np.ndarray, tol: float) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise DecompositionError(f"expected a square matrix, got shape {u.shape}")
    k = u.shape[0]
    _check_dim(k)
    err = np.abs(u.conj().T @ u - np.eye(k)).max()
    if err > tol:
        raise DecompositionError(f"matrix is not unitary: max |U^H U - I| = {err:.3e}")
    return u


class _MeshBuilder:
    """Accumulates phase-shifter/beamsplitter element pairs with layer tracking."""

    def __init__(self, k: int):
        self.k = k
        self.elements: list[CircuitElement] = []
        self._depth = [0] * k

    def add_block(self, mode: int, t: float, phi: float) -> None:
        a, b = mode, mode + 1
        layer = max(self._depth[a], self._depth[b])
        if abs(phi) > 1e-14:
            self.elements.append(
                CircuitElement(PHASE_SHIFTER, (a + 1,), phase=float(phi), layer=layer)
            )
        self.elements.append(
            CircuitElement(UNBALANCED_BS, (a + 1, b + 1), t=float(t), layer=layer)
        )
        self._depth[a] = self._depth[b] = layer + 1

    def add_output_phases(self, phases: np.ndarray) -> None:
        for port, phi in enumerate(phases, start=1):
            if abs(phi) > 1e-14:
                self.elements.append(
                    CircuitElement(
                        PHASE_SHIFTER, (port,), phase=float(phi), layer=max(self._depth)
                    )
                )


def reck_decompose(u: np.ndarray, tol: float = _UNITARITY_TOL) -> CircuitLayout:
    """Triangular mesh: K(K-1)/2 beamsplitter blocks, depth 2K-3.

    Nulls the below-diagonal entries row by row from the bottom using
    right-multiplications on adjacent column pairs; what remains is a
    diagonal of unit phases kept as output shifters.
    """
    u = _check_unitary(u, tol)
    k = u.shape[0]
    vt = u.T.copy()  # work transposed so the column pairs are contiguous rows
    g = np.empty((2, 2), dtype=complex)
    buf = np.empty((2, k), dtype=complex)
    sqrt, phase, exp = math.sqrt, cmath.phase, cmath.exp
    builder = _MeshBuilder(k)
    for i in range(k - 1, 0, -1):
        for j in range(0, i):
            a = complex(vt[j, i])
            bb = complex(vt[j + 1, i])
            aa, ab = abs(a), abs(bb)
            if aa == 0.0:
                builder.add_block(j, 1.0, 0.0)
                continue
            if ab == 0.0:
                t, phi = 0.0, 0.0
            else:
                t = ab * ab / (aa * aa + ab * ab)
                phi = phase(a * (-bb).conjugate())
            st, sr, e = sqrt(t), sqrt(1.0 - t), exp(-1j * phi)
            g[0, 0] = st * e
            g[0, 1] = sr
            g[1, 0] = -sr * e
            g[1, 1] = st
            np.matmul(g, vt[j : j + 2], out=buf)
            vt[j : j + 2] = buf
            vt[j, i] = 0.0
            builder.add_block(j, t, phi)
    v = vt.T.copy()
    _check_diagonal_residual(v)
    builder.add_output_phases(np.angle(np.diag(v)))
    return CircuitLayout(dim=k, design=DESIGN_RECK, elements=tuple(builder.elements))


def clements_decompose(u: np.ndarray, tol: float = _UNITARITY_TOL) -> CircuitLayout:
    """Rectangular mesh: K(K-1)/2 beamsplitter blocks, depth K.

    Alternates right- and left-multiplications along anti-diagonals, then
    commutes the residual diagonal through the left factors so that every
    block keeps the standard embedding and all residual phases end up at
    the outputs.
    """
    u = _check_unitary(u, tol)
    k = u.shape[0]
    v = u.copy()
    g = np.empty((2, 2), dtype=complex)
    row_buf = np.empty((2, k), dtype=complex)
    col_buf = np.empty((k, 2), dtype=complex)
    sqrt, phase, exp = math.sqrt, cmath.phase, cmath.exp
    rights: list[tuple[int, float, float]] = []
    lefts: list[tuple[int, float, float]] = []
    for d in range(1, k):
        if d % 2 == 1:
            for j in range(d):
                row, col = k - 1 - j, d - 1 - j
                a = complex(v[row, col])
                bb = complex(v[row, col + 1])
                aa, ab = abs(a), abs(bb)
                if aa == 0.0:
                    rights.append((col, 1.0, 0.0))
                    continue
                if ab == 0.0:
                    t, phi = 0.0, 0.0
                else:
                    t = ab * ab / (aa * aa + ab * ab)
                    phi = phase(a * (-bb).conjugate())
                st, sr, e = sqrt(t), sqrt(1.0 - t), exp(-1j * phi)
                g[0, 0] = st * e
                g[0, 1] = -sr * e
                g[1, 0] = sr
                g[1, 1] = st
                np.matmul(v[:, col : col + 2], g, out=col_buf)
                v[:, col : col + 2] = col_buf
                v[row, col] = 0.0
                rights.append((col, t, phi))
        else:
            for j in range(d):
                row, col = k - d + j, j
                a = complex(v[row - 1, col])
                bb = complex(v[row, col])
                aa, ab = abs(a), abs(bb)
                if ab == 0.0:
                    lefts.append((row - 1, 1.0, 0.0))
                    continue
                if aa == 0.0:
                    t, phi = 0.0, 0.0
                else:
                    t = aa * aa / (aa * aa + ab * ab)
                    phi = phase(bb * a.conjugate())
                st, sr, e = sqrt(t), sqrt(1.0 - t), exp(1j * phi)
                g[0, 0] = st * e
                g[0, 1] = sr
                g[1, 0] = -sr * e
                g[1, 1] = st
                np.matmul(g, v[row - 1 : row + 1], out=row_buf)
                v[row - 1 : row + 1] = row_buf
                v[row, col] = 0.0
                lefts.append((row - 1, t, phi))
    _check_diagonal_residual(v)

    # U = L1^-1 ... Lp^-1 D R_q ... R_1.  Push D leftward through each L
    # using B(t, phi)^-1 diag(d1, d2) = diag(-e^{-i phi} d2, d2) B(t, phi~)
    # with e^{i phi~} = -d1/d2 on the block's two modes.
    diag = np.exp(1j * np.angle(np.diag(v)))
    reordered: list[tuple[int, float, float]] = []
    for mode, t, phi in reversed(lefts):
        d1, d2 = diag[mode], diag[mode + 1]
        phi_new = cmath.phase(-d1 / d2)
        diag[mode] = -cmath.exp(-1j * phi) * d2
        reordered.append((mode, t, phi_new))

    builder = _MeshBuilder(k)
    for mode, t, phi in rights:
        builder.add_block(mode, t, phi)
    # reordered already runs innermost-first, which is the application order
    # directly after the right-side blocks.
    for mode, t, phi in reordered:
        builder.add_block(mode, t, phi)
    builder.add_output_phases(np.angle(diag))
    return CircuitLayout(dim=k, design=DESIGN_CLEMENTS, elements=tuple(builder.elements))


def _check_diagonal_residual(v: np.ndarray) -> None:
    k = v.shape[0]
    off = np.abs(v - np.diag(np.diag(v))).max()
    mod = np.abs(np.abs(np.diag(v)) - 1.0).max()
    if off > 1e-8 or mod > 1e-8:
        raise DecompositionError(
            f"nulling left a non-diagonal residual (off {off:.3e}, |diag|-1 {mod:.3e})"
        )
    for i in range(k):
        v[i, i] = v[i, i] / abs(v[i, i])


def build_design(k: int, design: str) -> tuple[np.ndarray, CircuitLayout]:
    """Ideal transfer matrix and elementary layout for a named design."""
    _check_dim(k)
    if design == DESIGN_OPTIMAL:
        layout = optimal_tree_layout(k)
        return compose_layout(layout), layout
    if design == DESIGN_EXTENDABLE:
        layout = extendable_layout(k)
        return extendable_matrix(k), layout
    if design == DESIGN_RECK:
        target = dft_multiport(k)
        return target, reck_decompose(target)
    if design == DESIGN_CLEMENTS:
        target = dft_multiport(k)
        return target, clements_decompose(target)
    raise LayoutError(f"unknown design {design!r}; expected one of {DESIGNS}")


def table_counts(k: int, design: str) -> tuple[int, int]:
    """Expected (beamsplitter count, optical depth) for a design of size K."""
    _check_dim(k)
    if design == DESIGN_OPTIMAL:
        return k - 1, math.ceil(math.log2(k))
    if design == DESIGN_EXTENDABLE:
        return k - 1, k - 1
    if design == DESIGN_CLEMENTS:
        return k * (k - 1) // 2, k
    if design == DESIGN_RECK:
        return k * (k - 1) // 2, 2 * k - 3
    raise LayoutError(f"unknown design {design!r}")


def matrix_to_json(m: np.ndarray) -> str:
    m = np.asarray(m, dtype=complex)
    return json.dumps(
        {"dim": m.shape[0], "re": m.real.tolist(), "im": m.imag.tolist()}
    )


def matrix_from_json(text: str) -> np.ndarray:
    data = json.loads(text)
    m = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
    if m.shape != (data["dim"], data["dim"]):
        raise LayoutError(f"matrix JSON dim {data['dim']} does not match shape {m.shape}")
    return m


def layout_to_json(layout: CircuitLayout) -> str:
    return json.dumps(
        {
            "dim": layout.dim,
            "design": layout.design,
            "bs_count": layout.bs_count,
            "optical_depth": layout.optical_depth,
            "output_perm": list(layout.output_perm) if layout.output_perm else None,
            "elements": [
                {
                    "kind": e.kind,
                    "ports": list(e.ports),
                    "t": e.t,
                    "omega": e.omega,
                    "layer": e.layer,
                }
                for e in layout.elements
            ],
        }
    )


def layout_from_json(text: str) -> CircuitLayout:
    data = json.loads(text)
    elements = []
    for e in data["elements"]:
        kind = e["kind"]
        phase = e["omega"] if kind == PHASE_SHIFTER else None
        elements.append(
            CircuitElement(
                kind=kind,
                ports=tuple(e["ports"]),
                t=e.get("t"),
                phase=phase,
                layer=e.get("layer", 0),
            )
        )
    perm = data.get("output_perm")
    return CircuitLayout(
        dim=data["dim"],
        design=data["design"],
        elements=tuple(elements),
        output_perm=tuple(perm) if perm else None,
    )
