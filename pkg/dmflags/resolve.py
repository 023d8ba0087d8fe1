"""Free flag resolutions of differential modules.

The Cartan–Eilenberg construction works one column ``j`` at a time. With
``∂: D_{j+1} -> D_j`` it resolves the boundaries ``B_j = im ∂`` by
``F^B`` (starting at ``F^B_0 = D_{j+1}``, ``ε^B = ∂``) and the homology
``H_j`` by ``F^H`` (starting at the cycles, ``ε^H``). Column ``j`` of the
resolution is ``F^B ⊕ F^H ⊕ G^B`` where ``G^B`` is a copy of ``F^B`` with
negated differential, one flag degree higher, mapped by the identity onto
``F^B`` and by ``Θ = (γ, β)`` into ``F^Z = F^B ⊕ F^H`` of column ``j + 1``:

    [[d^B, α, 1 + γ],
     [0, d^H, β],
     [0, 0, -d^B]]

The augmentation sends ``F^B_0`` by ``∂``, ``F^H_0`` by ``ε^H`` and
``G^B_0`` by ``λ`` (the identity of ``D_{j+1}``). Perturbing away the
identity blocks degenerates the resolution onto ``⊕_j F^{H_j}``, an
anchored resolution of ``D``.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Literal

from dmflags.dm_core import (
    DiffModule,
    DmMorphism,
    HomotopySquare,
    dm_check,
    homology,
    is_homotopy,
    labelled_order,
    normalize_key,
)
from dmflags.errors import InvariantError, NotInImageError
from dmflags.flags import (
    FlagMorphism,
    FreeFlag,
    anchor_column,
    columns,
    is_anchored_resolution,
    minimize_anchor,
    transfer_anchor,
    triangular_invert,
)
from dmflags.groebner import syzygies
from dmflags.homalg import ChainComplex, free_resolution, lift_columns
from dmflags.matrix import GradedFreeModule, RingMatrix, column_degrees
from dmflags.perturb import SdrData, perturb_sdr


logger = logging.getLogger(__name__)

Kind = Literal["B", "H", "G"]
BOUNDARIES: Kind = "B"
CYCLES: Kind = "H"
CANCELLING: Kind = "G"


def _lift(target: RingMatrix, through: RingMatrix, what: str) -> RingMatrix:
    if target.is_zero():
        return RingMatrix.zeros(target.ring, through.ncols, target.ncols)
    if not through.ncols:
        raise InvariantError(f"{what}: nonzero target but nothing to lift through")
    try:
        return lift_columns(target, through)
    except NotInImageError as exc:
        raise InvariantError(f"{what}: {exc}") from exc


def _place(entries: dict, rows: Sequence[int], cols: Sequence[int], matrix: RingMatrix) -> None:
    for (r, c), value in matrix.entries.items():
        entries[(rows[r], cols[c])] = value


def _rows(matrix: RingMatrix, start: int, stop: int) -> RingMatrix:
    return matrix.submatrix(range(start, stop), range(matrix.ncols))


def _graded(ring, differentials: Mapping[int, RingMatrix], top: Sequence[int], shift: int) -> ChainComplex:
    """Complex with ``F_0`` in degrees ``top``; later degrees read off the differentials."""
    modules = {0: GradedFreeModule(tuple(top))}
    for k in sorted(differentials):
        modules[k] = GradedFreeModule(column_degrees(differentials[k], modules[k - 1].degrees, shift))
    return ChainComplex(ring, modules, dict(differentials))


def _top(C: ChainComplex) -> int:
    return C.support[1]


def _homology_problems(source: DiffModule, target: DiffModule) -> list[str]:
    mine, theirs = homology(source).lengths, homology(target).lengths
    out = []
    for key in sorted(set(mine) | set(theirs)):
        if mine.get(key, 0) != theirs.get(key, 0):
            out.append(f"homology length {mine.get(key, 0)} differs from {theirs.get(key, 0)} in degree {key}")
    return out


# ---------------------------------------------------------------------- #
# CE data
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class CePiece:
    """Column ``j``: the two resolutions, their augmentations and the gluing maps.

    ``alpha[k]: F^H_k -> F^B_{k-1}`` is the horseshoe block of ``F^Z``;
    ``theta[k]: G^B_k -> F^Z_{k-1}`` lands in the next column.
    """

    column: int
    boundaries: ChainComplex
    cycles: ChainComplex
    eps_b: RingMatrix
    eps_h: RingMatrix
    lam: RingMatrix
    alpha: Mapping[int, RingMatrix]
    theta: Mapping[int, RingMatrix] = field(default_factory=dict)

    @property
    def ring(self):
        return self.eps_b.ring

    def b_rank(self, k: int) -> int:
        return self.boundaries.rank(k)

    def h_rank(self, k: int) -> int:
        return self.cycles.rank(k)

    def z_rank(self, k: int) -> int:
        return self.b_rank(k) + self.h_rank(k)

    def alpha_at(self, k: int) -> RingMatrix:
        if k in self.alpha:
            return self.alpha[k]
        return RingMatrix.zeros(self.ring, self.b_rank(k - 1), self.h_rank(k))

    def d_z(self, k: int) -> RingMatrix:
        """``[[d^B_k, α_k], [0, d^H_k]]``."""
        return RingMatrix.block(
            self.ring,
            [self.b_rank(k - 1), self.h_rank(k - 1)],
            [self.b_rank(k), self.h_rank(k)],
            {(0, 0): self.boundaries.d(k), (0, 1): self.alpha_at(k), (1, 1): self.cycles.d(k)},
        )

    @property
    def eps_z(self) -> RingMatrix:
        return RingMatrix.hstack(self.ring, self.eps_b.nrows, [self.eps_b, self.eps_h])


def _empty_piece(D: DiffModule, j: int) -> CePiece:
    ring = D.ring
    zero = ChainComplex.zero(ring)
    return CePiece(
        j,
        zero,
        zero,
        RingMatrix.zeros(ring, D.component(j).rank, 0),
        RingMatrix.zeros(ring, D.component(j).rank, 0),
        RingMatrix.zeros(ring, D.component(j + 1).rank, 0),
        {},
    )


@dataclass(frozen=True, eq=False)
class CeResolution:
    """A CE resolution ``G`` of ``target`` with its block layout.

    ``positions[(kind, j, k)]`` lists the generator positions in ``flag``
    of the k-th module of ``F^{B_j}`` (``"B"``), ``F^{H_j}`` (``"H"``) or
    ``G^{B_j}`` (``"G"``).
    """

    target: DiffModule
    flag: FreeFlag
    pieces: Mapping[int, CePiece]
    positions: Mapping[tuple[str, int, int], tuple[int, ...]]
    augmentation: DmMorphism

    @property
    def module(self) -> DiffModule:
        return self.flag.module

    @property
    def rank(self) -> int:
        return self.flag.rank

    def next_column(self, j: int) -> int:
        return normalize_key(j + 1, self.target.modulus)

    def piece(self, j: int) -> CePiece:
        j = normalize_key(j, self.target.modulus)
        return self.pieces[j] if j in self.pieces else _empty_piece(self.target, j)

    def block(self, kind: Kind, column: int, k: int) -> tuple[int, ...]:
        return self.positions.get((kind, normalize_key(column, self.target.modulus), k), ())

    def kind_positions(self, kind: Kind) -> list[int]:
        return sorted(p for (name, _, _), block in self.positions.items() if name == kind for p in block)

    def theta(self, j: int, k: int) -> RingMatrix:
        piece = self.piece(j)
        if k in piece.theta:
            return piece.theta[k]
        return RingMatrix.zeros(self.target.ring, self.piece(self.next_column(j)).z_rank(k - 1), piece.b_rank(k))

    def gamma(self, j: int, k: int) -> RingMatrix:
        """``γ_k: G^{B_j}_k -> F^{B_{j+1}}_{k-1}``."""
        theta = self.theta(j, k)
        return _rows(theta, 0, self.piece(self.next_column(j)).b_rank(k - 1))

    def beta(self, j: int, k: int) -> RingMatrix:
        """``β_k: G^{B_j}_k -> F^{H_{j+1}}_{k-1}``."""
        theta = self.theta(j, k)
        return _rows(theta, self.piece(self.next_column(j)).b_rank(k - 1), theta.nrows)

    def identity_part(self) -> RingMatrix:
        """The identity blocks ``G^{B_j}_k -> F^{B_j}_k``."""
        entries = {}
        for (kind, j, k), block in self.positions.items():
            if kind != CANCELLING:
                continue
            for src, dst in zip(block, self.block(BOUNDARIES, j, k)):
                entries[(dst, src)] = self.target.ring.one
        return RingMatrix(self.target.ring, self.rank, self.rank, entries)

    def block_form_problems(self) -> list[str]:
        d = self.flag.differential
        out = []
        cancelling = self.kind_positions(CANCELLING)
        rest = self.kind_positions(BOUNDARIES) + self.kind_positions(CYCLES)
        if not d.submatrix(cancelling, rest).is_zero():
            out.append("F^B ⊕ F^H maps into G^B")
        if not d.submatrix(self.kind_positions(CYCLES), self.kind_positions(BOUNDARIES)).is_zero():
            out.append("F^B maps into F^H")
        for (kind, j, k), block in self.positions.items():
            if kind != CANCELLING:
                continue
            identity = d.submatrix(self.block(BOUNDARIES, j, k), block)
            if identity != RingMatrix.identity(self.target.ring, len(block)):
                out.append(f"G^B_{k} -> F^B_{k} is not the identity in column {j}")
            if k and d.submatrix(self.block(CANCELLING, j, k - 1), block) != -d.submatrix(
                self.block(BOUNDARIES, j, k - 1), self.block(BOUNDARIES, j, k)
            ):
                out.append(f"G^B does not carry the negated differential at {k} in column {j}")
        return out

    def problems(self, check_homology: bool = True) -> list[str]:
        report = dm_check(self.module)
        out = [] if report.passed else [report.summary()]
        out.extend(self.block_form_problems())
        out.extend(f"augmentation: {p}" for p in self.augmentation.problems())
        if check_homology and not out:
            out.extend(_homology_problems(self.module, self.target))
        return out

    def verified(self, check_homology: bool = True) -> CeResolution:
        self.flag.verified()
        problems = self.problems(check_homology)
        if problems:
            raise InvariantError(f"invalid CE resolution: {'; '.join(problems)}")
        return self

    def summary(self) -> dict:
        """Ranks per column, for reports."""
        return {
            str(j): {
                "boundaries": list(piece.boundaries.ranks),
                "homology": list(piece.cycles.ranks),
            }
            for j, piece in sorted(self.pieces.items())
        }


def _assemble(
    D: DiffModule,
    pieces: Mapping[int, CePiece],
    h_order: Sequence[tuple[int, int, int]] | None = None,
) -> CeResolution:
    """Lay the pieces out as one flag.

    Raw generator order is ``F^H`` (in ``h_order``), then ``F^B``, then
    ``G^B``; sorting by ℤ/dℤ-degree is stable, so inside one degree the
    ``F^H`` generators keep ``h_order``.
    """
    ring, modulus, shift = D.ring, D.modulus, D.shift
    if h_order is None:
        h_order = [
            (j, k, t)
            for j, piece in sorted(pieces.items())
            for k in range(_top(piece.cycles) + 1)
            for t in range(piece.h_rank(k))
        ]
    raw: list[tuple[str, int, int, int]] = []
    generators: list[tuple[int, int, int]] = []
    for j, k, t in h_order:
        raw.append((CYCLES, j, k, t))
        generators.append((k, j, pieces[j].cycles.module(k).degrees[t]))
    for j, piece in sorted(pieces.items()):
        for k in range(_top(piece.boundaries) + 1):
            for t, deg in enumerate(piece.boundaries.module(k).degrees):
                raw.append((BOUNDARIES, j, k, t))
                generators.append((k, j, deg))
    for j, piece in sorted(pieces.items()):
        for k in range(_top(piece.boundaries) + 1):
            for t, deg in enumerate(piece.boundaries.module(k).degrees):
                raw.append((CANCELLING, j, k, t))
                generators.append((k + 1, j, deg - shift))

    labels = [(normalize_key(i + j, modulus), deg) for i, j, deg in generators]
    order = labelled_order(labels, modulus)
    collected: dict[tuple[str, int, int], dict[int, int]] = {}
    for position, r in enumerate(order):
        kind, j, k, t = raw[r]
        collected.setdefault((kind, j, k), {})[t] = position
    positions = {key: tuple(block[t] for t in range(len(block))) for key, block in collected.items()}

    def pos(kind: Kind, j: int, k: int) -> tuple[int, ...]:
        return positions.get((kind, normalize_key(j, modulus), k), ())

    entries: dict[tuple[int, int], object] = {}
    augmentation: dict[tuple[int, int], object] = {}
    for j, piece in sorted(pieces.items()):
        nxt = normalize_key(j + 1, modulus)
        for k in range(1, _top(piece.boundaries) + 1):
            _place(entries, pos(BOUNDARIES, j, k - 1), pos(BOUNDARIES, j, k), piece.boundaries.d(k))
            _place(entries, pos(CANCELLING, j, k - 1), pos(CANCELLING, j, k), -piece.boundaries.d(k))
        for k in range(_top(piece.boundaries) + 1):
            _place(entries, pos(BOUNDARIES, j, k), pos(CANCELLING, j, k), RingMatrix.identity(ring, piece.b_rank(k)))
        for k in range(1, _top(piece.cycles) + 1):
            _place(entries, pos(CYCLES, j, k - 1), pos(CYCLES, j, k), piece.cycles.d(k))
            _place(entries, pos(BOUNDARIES, j, k - 1), pos(CYCLES, j, k), piece.alpha_at(k))
        for k, theta in piece.theta.items():
            rows = pos(BOUNDARIES, nxt, k - 1) + pos(CYCLES, nxt, k - 1)
            _place(entries, rows, pos(CANCELLING, j, k), theta)
        rows_j, rows_next = list(D.positions(j)), list(D.positions(j + 1))
        _place(augmentation, rows_j, pos(BOUNDARIES, j, 0), piece.eps_b)
        _place(augmentation, rows_j, pos(CYCLES, j, 0), piece.eps_h)
        _place(augmentation, rows_next, pos(CANCELLING, j, 0), piece.lam)

    n = len(raw)
    matrix = RingMatrix.build(ring, n, n, entries)
    module = DiffModule.from_labelled(ring, modulus, [labels[r] for r in order], matrix, shift)
    flag = FreeFlag(module, tuple(generators[r][0] for r in order))
    eta = DmMorphism(module, D, RingMatrix.build(ring, D.rank, n, augmentation))
    ce = CeResolution(D, flag, dict(pieces), positions, eta)
    ce.verified(check_homology=False)
    logger.info("CE resolution: rank %d over %d columns", n, len(pieces))
    return ce


# ---------------------------------------------------------------------- #
# construction
# ---------------------------------------------------------------------- #


def _columns(D: DiffModule) -> list[int]:
    if D.modulus:
        return list(range(D.modulus)) if D.rank else []
    return sorted({key + s for key in D.keys for s in (-1, 0, 1)})


def _standard_piece(
    D: DiffModule,
    j: int,
    cycles_at: Mapping[int, object],
    minimize: bool,
    length_cap: int | None,
) -> CePiece:
    ring, shift = D.ring, D.shift
    rows_j = D.component(j).degrees
    top = D.component(j + 1).degrees
    boundary = D.boundary(j + 1)

    if top:
        res_b = free_resolution(syzygies(boundary), minimize=False, length_cap=length_cap, row_degrees=top)
        boundaries = _graded(
            ring, {k: res_b.d(k) for k in range(1, _top(res_b) + 1)}, [deg + shift for deg in top], shift
        )
    else:
        boundaries = ChainComplex.zero(ring)
    eps_b = boundary

    hdeg = cycles_at.get(j)
    if hdeg is not None and hdeg.cycles.ncols:
        cycles = hdeg.cycles.submatrix(D.positions(j), range(hdeg.cycles.ncols))
        relations = hdeg.presentation()
        relations = relations.submatrix(range(relations.nrows), [c for c, col in enumerate(relations.columns()) if col])
        res_h = free_resolution(
            relations, minimize=minimize, length_cap=length_cap, row_degrees=column_degrees(cycles, rows_j)
        )
        eps_h = cycles @ res_h.augmentation
        homology_res = _graded(
            ring, {k: res_h.d(k) for k in range(1, _top(res_h) + 1)}, res_h.module(0).degrees, shift
        )
    else:
        eps_h = RingMatrix.zeros(ring, len(rows_j), 0)
        homology_res = ChainComplex.zero(ring)

    alpha: dict[int, RingMatrix] = {}
    for k in range(1, _top(homology_res) + 1):
        if k == 1:
            target, through = -(eps_h @ homology_res.d(1)), eps_b
        else:
            target, through = -(alpha[k - 1] @ homology_res.d(k)), boundaries.d(k - 1)
        alpha[k] = _lift(target, through, f"horseshoe α_{k} in column {j}")
    lam = RingMatrix.identity(ring, len(top))
    return CePiece(j, boundaries, homology_res, eps_b, eps_h, lam, alpha)


def _with_thetas(pieces: dict[int, CePiece], D: DiffModule) -> dict[int, CePiece]:
    """Fill in ``Θ_k``: ``ε^Z Θ_1 = λ d^B_1`` and ``d^Z Θ_k = Θ_{k-1} d^B_k``."""
    out = {}
    for j, piece in pieces.items():
        nxt = normalize_key(j + 1, D.modulus)
        other = pieces.get(nxt) or _empty_piece(D, nxt)
        theta: dict[int, RingMatrix] = {}
        for k in range(1, _top(piece.boundaries) + 1):
            if k == 1:
                target, through = piece.lam @ piece.boundaries.d(1), other.eps_z
            else:
                target, through = theta[k - 1] @ piece.boundaries.d(k), other.d_z(k - 1)
            theta[k] = _lift(target, through, f"Θ_{k} from column {j}")
        out[j] = CePiece(
            piece.column, piece.boundaries, piece.cycles, piece.eps_b, piece.eps_h, piece.lam, piece.alpha, theta
        )
    return out


def ce_resolution(D: DiffModule, minimize: bool = False, length_cap: int | None = None) -> CeResolution:
    """CE resolution of ``D``; ``minimize`` makes every ``F^{H_j}`` minimal."""
    D.verified()
    hom = homology(D)
    pieces = {}
    for j in _columns(D):
        pieces[j] = _standard_piece(D, j, hom.degrees, minimize, length_cap)
        logger.debug(
            "column %d: F^B ranks %s, F^H ranks %s", j, pieces[j].boundaries.ranks, pieces[j].cycles.ranks
        )
    return _assemble(D, _with_thetas(pieces, D))


# ---------------------------------------------------------------------- #
# lifting morphisms
# ---------------------------------------------------------------------- #


def _block_at(phi: DmMorphism, key: int) -> RingMatrix:
    return phi.matrix.submatrix(phi.target.positions(key), phi.source.positions(key))


def ce_lift(phi: DmMorphism, G: CeResolution, G_prime: CeResolution) -> FlagMorphism:
    """Flag-preserving ``Φ: G -> G′`` with ``η′Φ = φη``.

    On ``F^B`` and ``G^B`` the lift is the comparison map ``ν`` of the
    boundary resolutions; on ``F^H`` it is ``(σ, ψ)`` into
    ``F^{B′} ⊕ F^{H′}``; ``G^B_k`` has the extra component
    ``Ψ_k: G^B_k -> F^{Z′}_k`` of the next column.
    """
    if phi.source != G.target or phi.target != G_prime.target:
        raise InvariantError("connection mismatch: φ does not run between the resolved modules")
    phi.verified()
    ring = phi.matrix.ring
    cols = sorted(set(G.pieces) | set(G_prime.pieces))
    nu: dict[tuple[int, int], RingMatrix] = {}
    sigma: dict[tuple[int, int], RingMatrix] = {}
    psi: dict[tuple[int, int], RingMatrix] = {}
    big_psi: dict[tuple[int, int], RingMatrix] = {}

    def nu_at(j: int, k: int) -> RingMatrix:
        if (j, k) in nu:
            return nu[(j, k)]
        return RingMatrix.zeros(ring, G_prime.piece(j).b_rank(k), G.piece(j).b_rank(k))

    def sigma_at(j: int, k: int) -> RingMatrix:
        if (j, k) in sigma:
            return sigma[(j, k)]
        return RingMatrix.zeros(ring, G_prime.piece(j).b_rank(k), G.piece(j).h_rank(k))

    def psi_at(j: int, k: int) -> RingMatrix:
        if (j, k) in psi:
            return psi[(j, k)]
        return RingMatrix.zeros(ring, G_prime.piece(j).h_rank(k), G.piece(j).h_rank(k))

    for j in cols:
        piece, other = G.piece(j), G_prime.piece(j)
        nxt = G.next_column(j)
        other_next = G_prime.piece(nxt)
        # ν_0 and Ψ_0 together: λ′ν_0 + ε′^Z Ψ_0 = φλ.
        if piece.b_rank(0):
            through = RingMatrix.hstack(ring, other.lam.nrows, [other.lam, other_next.eps_z])
            lifted = _lift(_block_at(phi, j + 1) @ piece.lam, through, f"ν_0 in column {j}")
            nu[(j, 0)] = _rows(lifted, 0, other.b_rank(0))
            big_psi[(j, 0)] = _rows(lifted, other.b_rank(0), lifted.nrows)
        for k in range(1, _top(piece.boundaries) + 1):
            nu[(j, k)] = _lift(nu_at(j, k - 1) @ piece.boundaries.d(k), other.boundaries.d(k), f"ν_{k} in column {j}")
        for k in range(_top(piece.cycles) + 1):
            if k == 0:
                target, through = _block_at(phi, j) @ piece.eps_h, other.eps_z
            else:
                upper = nu_at(j, k - 1) @ piece.alpha_at(k) + sigma_at(j, k - 1) @ piece.cycles.d(k)
                lower = psi_at(j, k - 1) @ piece.cycles.d(k)
                target = RingMatrix.vstack(ring, piece.h_rank(k), [upper, lower])
                through = other.d_z(k)
            lifted = _lift(target, through, f"F^H lift at {k} in column {j}")
            sigma[(j, k)] = _rows(lifted, 0, other.b_rank(k))
            psi[(j, k)] = _rows(lifted, other.b_rank(k), lifted.nrows)

    for j in cols:
        piece = G.piece(j)
        nxt = G.next_column(j)
        source_next, other_next = G.piece(nxt), G_prime.piece(nxt)
        for k in range(1, _top(piece.boundaries) + 1):
            mu = RingMatrix.block(
                ring,
                [other_next.b_rank(k - 1), other_next.h_rank(k - 1)],
                [source_next.b_rank(k - 1), source_next.h_rank(k - 1)],
                {(0, 0): nu_at(nxt, k - 1), (0, 1): sigma_at(nxt, k - 1), (1, 1): psi_at(nxt, k - 1)},
            )
            previous = big_psi.get(
                (j, k - 1), RingMatrix.zeros(ring, other_next.z_rank(k - 1), piece.b_rank(k - 1))
            )
            target = mu @ G.theta(j, k) - G_prime.theta(j, k) @ nu_at(j, k) - previous @ piece.boundaries.d(k)
            big_psi[(j, k)] = _lift(target, other_next.d_z(k), f"Ψ_{k} in column {j}")

    entries: dict[tuple[int, int], object] = {}
    for j in cols:
        nxt = G.next_column(j)
        for (jj, k), block in nu.items():
            if jj != j:
                continue
            _place(entries, G_prime.block(BOUNDARIES, j, k), G.block(BOUNDARIES, j, k), block)
            _place(entries, G_prime.block(CANCELLING, j, k), G.block(CANCELLING, j, k), block)
        for (jj, k), block in sigma.items():
            if jj == j:
                _place(entries, G_prime.block(BOUNDARIES, j, k), G.block(CYCLES, j, k), block)
                _place(entries, G_prime.block(CYCLES, j, k), G.block(CYCLES, j, k), psi[(j, k)])
        for (jj, k), block in big_psi.items():
            if jj == j:
                rows = G_prime.block(BOUNDARIES, nxt, k) + G_prime.block(CYCLES, nxt, k)
                _place(entries, rows, G.block(CANCELLING, j, k), block)

    lift = FlagMorphism(G.flag, G_prime.flag, RingMatrix.build(ring, G_prime.rank, G.rank, entries))
    lift.verified()
    if G_prime.augmentation.matrix @ lift.matrix != phi.matrix @ G.augmentation.matrix:
        raise InvariantError("CE lift does not commute with the augmentations")
    return lift


# ---------------------------------------------------------------------- #
# degeneration to the homology
# ---------------------------------------------------------------------- #


@dataclass(frozen=True, eq=False)
class AnchoredResolution:
    """A flag resolution anchored on resolutions of the homology.

    ``sdr_from_ce`` retracts the CE resolution onto ``flag`` (absent for
    flags obtained otherwise); ``augmentation`` is a quasi-isomorphism onto
    the resolved module.
    """

    flag: FreeFlag
    anchor_resolutions: Mapping[int, ChainComplex]
    sdr_from_ce: SdrData | None
    augmentation: DmMorphism
    ce: CeResolution | None = None

    @property
    def target(self) -> DiffModule:
        return self.augmentation.target

    def problems(self) -> list[str]:
        out = []
        if not is_anchored_resolution(self.flag):
            out.append("anchor has homology in positive flag degree")
        out.extend(f"augmentation: {p}" for p in self.augmentation.problems())
        if not out:
            out.extend(_homology_problems(self.flag.module, self.target))
        return out

    def verified(self) -> AnchoredResolution:
        self.flag.verified()
        problems = self.problems()
        if problems:
            raise InvariantError(f"invalid anchored resolution: {'; '.join(problems)}")
        return self


def _degenerate(ce: CeResolution) -> AnchoredResolution:
    """Perturb ``(G, identity blocks) ⇄ (⊕ F^H, 0)`` by the rest of ``d^G``.

    The unperturbed retract has ``h = -1: F^B_k -> G^B_k``; the transferred
    differential is ``δ_0 + β(1 - γ + γ² - ···)α`` up to the sign of ``α``.
    """
    G = ce.module
    ring, n = G.ring, G.rank
    kept = ce.kind_positions(CYCLES)
    d0 = ce.identity_part()
    big0 = G.with_differential(d0)
    labels = G.labels
    small0 = DiffModule.from_labelled(
        ring, G.modulus, [labels[g] for g in kept], RingMatrix.zeros(ring, len(kept), len(kept)), G.shift
    )
    sdr0 = SdrData(
        big0,
        small0,
        DmMorphism(big0, small0, RingMatrix.projection(ring, n, kept)),
        DmMorphism(small0, big0, RingMatrix.embedding(ring, n, kept)),
        -d0.transpose(),
    ).verified()
    sdr, _ = perturb_sdr(sdr0, G.differential - d0)
    flag = FreeFlag(sdr.small, tuple(ce.flag.flag[g] for g in kept))
    augmentation = DmMorphism(flag.module, ce.target, ce.augmentation.matrix @ sdr.iota.matrix).verified()
    anchors = {j: piece.cycles for j, piece in sorted(ce.pieces.items()) if piece.cycles.ranks}
    logger.info("degenerated CE resolution: rank %d -> %d", n, flag.rank)
    return AnchoredResolution(flag, anchors, sdr, augmentation, ce)


def degenerate_to_homology(
    D: DiffModule,
    minimize: bool = False,
    length_cap: int | None = None,
) -> AnchoredResolution:
    """Anchored flag resolution of ``D`` on ``⊕_j F^{H_j(D)}``."""
    return _degenerate(ce_resolution(D, minimize, length_cap)).verified()


def quasiminimal(D: DiffModule, length_cap: int | None = None) -> AnchoredResolution:
    """Degeneration with minimal anchor resolutions.

    Minimality of the anchor needs homogeneous input; otherwise constant
    entries may survive in ``δ_0`` and a warning is logged.
    """
    resolution = degenerate_to_homology(D, minimize=True, length_cap=length_cap)
    units = resolution.flag.delta0.unit_positions()
    if units:
        logger.warning("anchor keeps %d constant entries; input is probably not homogeneous", len(units))
    return resolution


def minimal_summand(A: AnchoredResolution) -> tuple[AnchoredResolution, SdrData]:
    """The quasiminimal resolution inside ``A`` as a flag-preserving summand.

    Cancels the constant entries of the anchor and transfers the strata;
    the returned retract satisfies ``p ι = 1`` with ``p`` and ``ι`` flag
    preserving.
    """
    anchor_sdr, small_flag = minimize_anchor(A.flag)
    flag, retract = transfer_anchor(A.flag, anchor_sdr, small_flag)
    if not retract.is_retract:
        raise InvariantError("minimal summand: pι differs from the identity")
    FlagMorphism(A.flag, flag, retract.p.matrix)
    FlagMorphism(flag, A.flag, retract.iota.matrix)
    augmentation = DmMorphism(flag.module, A.target, A.augmentation.matrix @ retract.iota.matrix).verified()
    sdr = A.sdr_from_ce.then(retract) if A.sdr_from_ce is not None else None
    anchors = {j: anchor_column(flag, j) for j in columns(flag)}
    return AnchoredResolution(flag, anchors, sdr, augmentation, A.ce).verified(), retract


# ---------------------------------------------------------------------- #
# anchored flags as retracts of CE resolutions
# ---------------------------------------------------------------------- #


def _retract_columns(F: FreeFlag) -> list[int]:
    if F.modulus:
        return list(range(F.modulus)) if F.rank else []
    found = set()
    for flag_degree, column in F.components:
        found.update(column + i - 1 for i in range(0, flag_degree + 1))
        found.update((column, column + 1))
    return sorted(found)


def _retract_pieces(F: FreeFlag) -> dict[int, CePiece]:
    """Boundaries and cycles resolutions read off the strata of ``F``.

    ``F^{H_c}_i = F_{i, c}`` with ``δ_0``; ``F^{B_c}_k = ⊕_{i≥1} F_{i+k, c+1-i}``
    with ``-(δ_0 + ··· + δ_{i-1})`` on the ``i``-th summand, ``λ`` the
    inclusion of the flag degree ``≥ 1`` part of ``D_{c+1}``; ``α`` is minus
    the inclusion onto the ``i = 1`` summand, ``γ`` is minus the shift of
    summands into the next column and ``β = δ_i`` on the ``i``-th summand.
    """
    D = F.module
    ring, modulus, shift = D.ring, D.modulus, D.shift
    comps = F.components
    height = F.height
    diff = F.differential
    degrees = D.degrees
    cols = _retract_columns(F)

    def comp(i: int, c: int) -> list[int]:
        return comps.get((i, normalize_key(c, modulus)), [])

    def gens_b(c: int, k: int) -> list[int]:
        return [g for i in range(1, height - k + 1) for g in comp(i + k, c + 1 - i)]

    def local(key: int, gens: Sequence[int]) -> list[int]:
        offset = D.offset(key)
        return [g - offset for g in gens]

    pieces: dict[int, CePiece] = {}
    for c in cols:
        nxt = normalize_key(c + 1, modulus)
        b_top = max((k for k in range(height) if gens_b(c, k)), default=-1)
        boundaries = ChainComplex(
            ring,
            {k: GradedFreeModule(tuple(degrees[g] + shift for g in gens_b(c, k))) for k in range(b_top + 1)},
            {k: -diff.submatrix(gens_b(c, k - 1), gens_b(c, k)) for k in range(1, b_top + 1)},
        )
        h_top = max((i for i in range(height + 1) if comp(i, c)), default=-1)
        cycles = ChainComplex(
            ring,
            {i: GradedFreeModule(tuple(degrees[g] for g in comp(i, c))) for i in range(h_top + 1)},
            {i: diff.submatrix(comp(i - 1, c), comp(i, c)) for i in range(1, h_top + 1)},
        )
        eps_h = RingMatrix.embedding(ring, D.component(c).rank, local(c, comp(0, c)))
        lam = RingMatrix.embedding(ring, D.component(c + 1).rank, local(c + 1, gens_b(c, 0)))
        eps_b = D.boundary(c + 1) @ lam

        alpha = {}
        for i in range(1, h_top + 1):
            index = {g: t for t, g in enumerate(gens_b(c, i - 1))}
            alpha[i] = RingMatrix(
                ring, len(index), len(comp(i, c)), {(index[g], t): -ring.one for t, g in enumerate(comp(i, c))}
            )

        theta = {}
        for k in range(1, b_top + 1):
            source = gens_b(c, k)
            index = {g: t for t, g in enumerate(gens_b(nxt, k - 1))}
            gamma = RingMatrix(ring, len(index), len(source), {(index[g], t): -ring.one for t, g in enumerate(source)})
            beta = diff.submatrix(comp(k - 1, nxt), source)
            theta[k] = RingMatrix.vstack(ring, len(source), [gamma, beta])
        pieces[c] = CePiece(c, boundaries, cycles, eps_b, eps_h, lam, alpha, theta)
    return pieces


def anchored_as_retract(F: FreeFlag) -> tuple[CeResolution, SdrData, RingMatrix]:
    """CE resolution of ``F`` retracting onto ``F`` itself.

    Returns the CE resolution, the perturbed retract ``G ⇄ F`` and the
    witness ``η ∘ ι∞``, checked to be the identity of ``F``.
    """
    if not is_anchored_resolution(F):
        raise InvariantError("flag is not anchored on a resolution")
    F.verified()
    comps = F.components
    where = {g: t for gens in comps.values() for t, g in enumerate(gens)}
    h_order = [(F.column_of(g), F.flag[g], where[g]) for g in range(F.rank)]
    ce = _assemble(F.module, _retract_pieces(F), h_order)
    anchored = _degenerate(ce)
    if anchored.flag.module != F.module or anchored.flag.flag != F.flag:
        raise InvariantError("degenerating the CE resolution does not recover the flag")
    sdr = SdrData(
        anchored.sdr_from_ce.big,
        F.module,
        DmMorphism(anchored.sdr_from_ce.big, F.module, anchored.sdr_from_ce.p.matrix),
        DmMorphism(F.module, anchored.sdr_from_ce.big, anchored.sdr_from_ce.iota.matrix),
        anchored.sdr_from_ce.h,
    )
    witness = ce.augmentation.matrix @ sdr.iota.matrix
    if witness != RingMatrix.identity(F.ring, F.rank):
        raise InvariantError("η ∘ ι∞ differs from the identity")
    return ce, sdr, witness


def _preserves_flag(matrix: RingMatrix, source: FreeFlag, target: FreeFlag) -> bool:
    return all(target.flag[r] <= source.flag[c] for (r, c), _ in matrix.items())


def flag_preserve_up_to_homotopy(
    phi: DmMorphism,
    F: FreeFlag,
    F_prime: FreeFlag,
) -> tuple[FlagMorphism, RingMatrix]:
    """Flag-preserving ``ψ`` and ``h`` with ``φ - ψ = d′h + hd``.

    ``ψ = p′∞ Φ ι∞`` for the CE lift ``Φ`` between the CE resolutions that
    retract onto ``F`` and ``F′``; ``h = -η′ h′∞ Φ ι∞``.
    """
    for name, flag in (("source", F), ("target", F_prime)):
        if not is_anchored_resolution(flag):
            raise InvariantError(f"{name} flag is not anchored on a resolution")
    if phi.source != F.module or phi.target != F_prime.module:
        raise InvariantError("connection mismatch: φ does not run between the flags")
    phi.verified()
    if _preserves_flag(phi.matrix, F, F_prime):
        return FlagMorphism(F, F_prime, phi.matrix), RingMatrix.zeros(F.ring, F_prime.rank, F.rank)
    G, sdr, _ = anchored_as_retract(F)
    G_prime, sdr_prime, _ = anchored_as_retract(F_prime)
    lift = ce_lift(phi, G, G_prime)
    carried = lift.matrix @ sdr.iota.matrix
    psi = FlagMorphism(F, F_prime, sdr_prime.p.matrix @ carried).verified()
    h = -(G_prime.augmentation.matrix @ sdr_prime.h @ carried)
    if not is_homotopy(phi.matrix, psi.matrix, h, F.module, F_prime.module):
        raise InvariantError("φ - ψ differs from dh + hd")
    return psi, h


def functorial_degeneration(
    phi: DmMorphism,
    minimize: bool = False,
) -> tuple[AnchoredResolution, AnchoredResolution, FlagMorphism, HomotopySquare]:
    """Anchored resolutions of both ends and a flag-preserving lift of ``φ``.

    The square ``η′ψ - φη = dh + hd`` carries ``h = η′_G h′∞ Φ ι∞``.
    """
    source = degenerate_to_homology(phi.source, minimize)
    target = degenerate_to_homology(phi.target, minimize)
    lift = ce_lift(phi, source.ce, target.ce)
    carried = lift.matrix @ source.sdr_from_ce.iota.matrix
    psi = FlagMorphism(source.flag, target.flag, target.sdr_from_ce.p.matrix @ carried).verified()
    h = target.ce.augmentation.matrix @ target.sdr_from_ce.h @ carried
    square = HomotopySquare(source.augmentation, target.augmentation, psi.dm, phi, h).verified()
    return source, target, psi, square


# ---------------------------------------------------------------------- #
# lifting through the cone of an augmentation
# ---------------------------------------------------------------------- #


def _solve_through_cone(
    F: FreeFlag,
    eta: DmMorphism,
    base: RingMatrix,
    sign: int,
    raise_by: int,
) -> tuple[RingMatrix, RingMatrix]:
    """Columns ``u(x) = (a(x), b(x))`` of ``D ⊕ Q`` with ``d_C u(x) = base(x) + sign·u(dx)``.

    ``d_C = [[∂, -η], [0, -d_Q]]`` is the cone differential of ``η: Q -> D``.
    Generators of ``F`` are handled by increasing flag degree, so ``u(dx)``
    is known when ``x`` is reached; ``u(x)`` sits in cone degree
    ``key(x) + 1 + raise_by``.
    """
    Q, D = eta.source, eta.target
    ring, m, q, n = D.ring, D.rank, Q.rank, F.rank
    sizes = [m, q]
    cone_d = RingMatrix.block(
        ring, sizes, sizes, {(0, 0): D.differential, (0, 1): -eta.matrix, (1, 1): -Q.differential}
    )
    cone_keys = D.key_of + [normalize_key(key + 1, D.modulus) for key in Q.key_of]
    groups: dict[tuple[int, int], list[int]] = {}
    for g, key in enumerate(F.module.key_of):
        groups.setdefault((F.flag[g], key), []).append(g)
    entries: dict[tuple[int, int], object] = {}
    for (flag_degree, key), gens in sorted(groups.items()):
        known = RingMatrix(ring, m + q, n, dict(entries))
        pulled = known @ F.differential.submatrix(range(n), gens)
        rhs = base.submatrix(range(m + q), gens) + (pulled if sign > 0 else -pulled)
        wanted = normalize_key(key + 1 + raise_by, D.modulus)
        cols = [c for c in range(m + q) if cone_keys[c] == wanted]
        lifted = _lift(rhs, cone_d.submatrix(range(m + q), cols), f"cone lift at flag degree {flag_degree}")
        for (r, c), value in lifted.entries.items():
            entries[(cols[r], gens[c])] = value
    logger.debug("cone lifting over %d generator groups", len(groups))
    solution = RingMatrix(ring, m + q, n, entries)
    return _rows(solution, 0, m), _rows(solution, m, m + q)


def lift_along_quasi_iso(
    F: FreeFlag,
    eta: DmMorphism,
    eta_prime: DmMorphism,
) -> tuple[DmMorphism, RingMatrix]:
    """``Φ: F -> Q`` and ``s`` with ``η′Φ - η = ∂s + sd``, where ``η′: Q -> D``."""
    if eta.source != F.module or eta.target != eta_prime.target:
        raise InvariantError("connection mismatch: augmentations do not share a target")
    ring = F.ring
    Q, D = eta_prime.source, eta_prime.target
    base = RingMatrix.vstack(ring, F.rank, [-eta.matrix, RingMatrix.zeros(ring, Q.rank, F.rank)])
    s, lift = _solve_through_cone(F, eta_prime, base, -1, 0)
    morphism = DmMorphism(F.module, Q, lift).verified()
    if not is_homotopy(eta_prime.matrix @ lift, eta.matrix, s, F.module, D):
        raise InvariantError("η′Φ - η differs from ∂s + sd")
    return morphism, s


def homotopy_between_lifts(
    F: FreeFlag,
    f: DmMorphism,
    g: DmMorphism,
    eta_prime: DmMorphism,
) -> tuple[RingMatrix, RingMatrix]:
    """``S`` with ``f - g = d′S + Sd`` and ``τ`` with ``η′S = ∂τ - τd``.

    Needs ``η′f = η′g`` exactly.
    """
    difference = f.matrix - g.matrix
    if not (eta_prime.matrix @ difference).is_zero():
        raise InvariantError("η′f differs from η′g")
    ring = F.ring
    Q, D = eta_prime.source, eta_prime.target
    base = RingMatrix.vstack(ring, F.rank, [RingMatrix.zeros(ring, D.rank, F.rank), -difference])
    tau, S = _solve_through_cone(F, eta_prime, base, 1, 1)
    if not is_homotopy(f.matrix, g.matrix, S, F.module, Q):
        raise InvariantError("f - g differs from d′S + Sd")
    if eta_prime.matrix @ S != D.differential @ tau - tau @ F.differential:
        raise InvariantError("η′S differs from ∂τ - τd")
    return S, tau


def flag_isomorphism(A: AnchoredResolution, A_prime: AnchoredResolution) -> tuple[FlagMorphism, FlagMorphism]:
    """Mutually inverse flag-preserving maps between two minimal anchored resolutions."""
    if A.target != A_prime.target:
        raise InvariantError("connection mismatch: resolutions of different modules")
    phi, _ = lift_along_quasi_iso(A.flag, A.augmentation, A_prime.augmentation)
    psi, _ = flag_preserve_up_to_homotopy(phi, A.flag, A_prime.flag)
    return psi, triangular_invert(psi)


@dataclass(frozen=True, eq=False)
class CeEquivalence:
    """Flag-preserving maps both ways with ``backward∘forward - 1 = dh + hd`` on each side."""

    forward: FlagMorphism
    backward: FlagMorphism
    h_source: RingMatrix
    h_target: RingMatrix


def ce_equivalence(G: CeResolution, G_prime: CeResolution) -> CeEquivalence:
    """Two CE resolutions of one module are flag-preserving homotopy equivalent."""
    if G.target != G_prime.target:
        raise InvariantError("connection mismatch: resolutions of different modules")
    identity = DmMorphism.identity(G.target)
    forward = ce_lift(identity, G, G_prime)
    backward = ce_lift(DmMorphism(G_prime.target, G.target, identity.matrix), G_prime, G)
    h_source, _ = homotopy_between_lifts(
        G.flag, (backward @ forward).dm, DmMorphism.identity(G.module), G.augmentation
    )
    h_target, _ = homotopy_between_lifts(
        G_prime.flag, (forward @ backward).dm, DmMorphism.identity(G_prime.module), G_prime.augmentation
    )
    return CeEquivalence(forward, backward, h_source, h_target)
