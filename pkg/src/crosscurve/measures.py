"""Closed-form geometry on probability vectors and PSD matrices.

Probability vectors live on a shared finite index set.  KL uses
F(t) = t log t - t + 1.  Hellinger and Fisher–Rao work with square-root
densities α = √μ on the unit sphere.  Bures–Wasserstein acts on symmetric
positive semi-definite matrices, possibly rank-deficient.
"""

from __future__ import annotations

import math

import numpy as np

from .core import CostSpace, SegmentPath
from .errors import PreconditionError
from .extreal import INF
from .families import sphere_segment

PROB_TOL = 1e-12
SYM_TOL = 1e-12
EIG_CLAMP = 1e-14


# -- validation and sampling ----------------------------------------------------------


def prob_vector(w, tol: float = PROB_TOL) -> np.ndarray:
    """Validate nonnegative weights summing to one and return them as an array."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("a probability vector is a nonempty 1-D array")
    if np.any(w < -tol):
        raise ValueError("probability vector has negative entries")
    if abs(float(w.sum()) - 1.0) > max(tol, 1e-12 * w.size):
        raise ValueError(f"probability vector sums to {w.sum()!r}, not 1")
    return np.clip(w, 0.0, None)


def random_prob(rng: np.random.Generator, n: int, p_zero: float = 0.0) -> np.ndarray:
    """Dirichlet(1) draw; with probability ``p_zero`` some entries are zeroed."""
    w = rng.dirichlet(np.ones(n))
    if p_zero > 0 and rng.random() < p_zero and n > 1:
        k = int(rng.integers(1, n))
        w[rng.choice(n, size=k, replace=False)] = 0.0
        if w.sum() == 0.0:
            w[int(rng.integers(n))] = 1.0
        w = w / w.sum()
    return w


def psd(S, tol: float = SYM_TOL) -> np.ndarray:
    """Validate a symmetric PSD matrix; tiny negative eigenvalues are clamped."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError("PSD matrix must be square")
    if np.max(np.abs(S - S.T), initial=0.0) > tol * max(1.0, float(np.max(np.abs(S), initial=0.0))):
        raise ValueError("matrix is not symmetric")
    S = 0.5 * (S + S.T)
    lam = np.linalg.eigvalsh(S)
    if lam.size and lam[0] < -1e-12 * max(1.0, lam[-1]):
        raise ValueError(f"matrix has a negative eigenvalue {lam[0]:.3g}")
    return S


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    rank = n if rank is None else rank
    G = rng.standard_normal((n, rank))
    return G @ G.T / max(rank, 1)


# -- KL ------------------------------------------------------------------------------


def _entropy_F(t: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = t * np.log(t) - t + 1.0
    return np.where(t == 0.0, 1.0, out)


def kl(mu, nu) -> float:
    """Σ_{ν_i>0} F(μ_i/ν_i) ν_i, or +inf when μ charges a zero of ν."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any((nu == 0) & (mu > 0)):
        return INF
    pos = nu > 0
    return float(np.sum(_entropy_F(mu[pos] / nu[pos]) * nu[pos]))


def kl_segment(mu0, mu1, nu=None) -> SegmentPath:
    """μ(s) = (1-s)μ0 + sμ1 with base point ``nu`` (defaults to μ0)."""
    mu0 = prob_vector(mu0)
    mu1 = prob_vector(mu1)
    base = mu0 if nu is None else prob_vector(nu)
    return SegmentPath(base, mu0, mu1, lambda s: (1 - s) * mu0 + s * mu1, name="kl mixture")


def kl_identity_residual(mu0, mu1, nu, s: float) -> float:
    """|(1-s)KL(μ0,ν) + sKL(μ1,ν) - KL(μ(s),ν) - [(1-s)KL(μ0,μ(s)) + sKL(μ1,μ(s))]|."""
    a, b = kl(mu0, nu), kl(mu1, nu)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise PreconditionError("KL(μ0, ν) and KL(μ1, ν) must be finite")
    ms = (1 - s) * np.asarray(mu0, dtype=float) + s * np.asarray(mu1, dtype=float)
    lhs = (1 - s) * a + s * b - kl(ms, nu)
    rhs = (1 - s) * kl(mu0, ms) + s * kl(mu1, ms)
    return abs(lhs - rhs)


def kl_cost(n: int, p_zero: float = 0.2) -> CostSpace:
    return CostSpace(fn=kl, name="kl", dim_x=n, dim_y=n, sampler=lambda rng, k: [random_prob(rng, n, p_zero) for _ in range(k)])


# -- Hellinger and Fisher–Rao --------------------------------------------------------------


def hellinger_sq(mu, nu) -> float:
    """Σ (√μ_i - √ν_i)²."""
    return float(np.sum((np.sqrt(np.asarray(mu, dtype=float)) - np.sqrt(np.asarray(nu, dtype=float))) ** 2))


def bhattacharyya(mu, nu) -> float:
    return float(np.sum(np.sqrt(np.asarray(mu, dtype=float) * np.asarray(nu, dtype=float))))


def fisher_rao(mu, nu) -> float:
    """FR = arccos(BC), evaluated as 2·atan2(‖α-β‖, ‖α+β‖) for accuracy at both ends."""
    a = np.sqrt(np.asarray(mu, dtype=float))
    b = np.sqrt(np.asarray(nu, dtype=float))
    bc = float(a @ b)
    if bc < -1e-12 or bc > 1 + 1e-12:
        raise ValueError(f"Bhattacharyya coefficient {bc!r} outside [0, 1]")
    return 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))


def _sqrt_batch(xs):
    return np.sqrt(np.asarray(xs, dtype=float))


def _hellinger_batch(xs, ys):
    A, B = _sqrt_batch(xs), _sqrt_batch(ys)
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _fr_batch(xs, ys):
    A, B = _sqrt_batch(xs), _sqrt_batch(ys)
    minus = np.sqrt(np.einsum("ijk,ijk->ij", A[:, None] - B[None], A[:, None] - B[None]))
    plus = np.sqrt(np.einsum("ijk,ijk->ij", A[:, None] + B[None], A[:, None] + B[None]))
    return (2.0 * np.arctan2(minus, plus)) ** 2


def hellinger_cost(n: int, p_zero: float = 0.3) -> CostSpace:
    return CostSpace(
        fn=hellinger_sq,
        name="hellinger",
        dim_x=n,
        dim_y=n,
        sampler=lambda rng, k: [random_prob(rng, n, p_zero) for _ in range(k)],
        batch=_hellinger_batch,
    )


def fr_cost(n: int, p_zero: float = 0.3) -> CostSpace:
    return CostSpace(
        fn=lambda m, v: fisher_rao(m, v) ** 2,
        name="fisher-rao",
        dim_x=n,
        dim_y=n,
        sampler=lambda rng, k: [random_prob(rng, n, p_zero) for _ in range(k)],
        batch=_fr_batch,
    )


def _reference_weights(reference, n):
    if reference is None:
        return np.ones(n)
    w = np.asarray(reference, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("reference measure must be strictly positive on the index set")
    return w


def hellinger_segment(mu0, mu1, nu_bar, reference=None) -> SegmentPath:
    """Segment in square-root coordinates relative to a dominating measure λ.

    With densities ρ = μ/λ and α = √ρ in L²(λ), the component of α orthogonal
    to β̄ = √(ν̄/λ) is interpolated linearly and lifted back to the sphere
    along β̄.  The result does not depend on λ.
    """
    mu0, mu1, nu_bar = prob_vector(mu0), prob_vector(mu1), prob_vector(nu_bar)
    lam = _reference_weights(reference, mu0.size)

    def inner(u, v):
        return float(np.sum(lam * u * v))

    beta = np.sqrt(nu_bar / lam)
    perp = []
    for mu in (mu0, mu1):
        alpha = np.sqrt(mu / lam)
        perp.append(alpha - inner(alpha, beta) * beta)
    p0, p1 = perp

    def path(s):
        a_perp = (1 - s) * p0 + s * p1
        height = math.sqrt(max(0.0, 1.0 - inner(a_perp, a_perp)))
        alpha = a_perp + height * beta
        return lam * alpha**2

    return SegmentPath(nu_bar, mu0, mu1, path, name="hellinger")


def _orthonormal_frame(vectors, inner, drop_tol: float = 1e-12):
    frame = []
    for v in vectors:
        w = v.copy()
        for e in frame:
            w = w - inner(w, e) * e
        nw = math.sqrt(max(inner(w, w), 0.0))
        if nw > drop_tol:
            frame.append(w / nw)
    return frame


def fr_segment(mu0, mu1, nu_bar, reference=None) -> SegmentPath:
    """Sphere segment through the orthonormal frame (β̄, e, f) spanned by the square roots.

    The coordinates of α0, α1 in the frame are unit vectors of R^k (k <= 3);
    the exp/log segment of the sphere is built there and mapped back by
    squaring.  When α0 or α1 already lies in the span of the earlier frame
    vectors the frame is reduced.
    """
    mu0, mu1, nu_bar = prob_vector(mu0), prob_vector(mu1), prob_vector(nu_bar)
    lam = _reference_weights(reference, mu0.size)

    def inner(u, v):
        return float(np.sum(lam * u * v))

    beta = np.sqrt(nu_bar / lam)
    a0 = np.sqrt(mu0 / lam)
    a1 = np.sqrt(mu1 / lam)
    frame = _orthonormal_frame([beta, a0, a1], inner)
    E = np.array(frame)

    def coords(v):
        c = np.array([inner(v, e) for e in frame])
        return c / np.linalg.norm(c)

    seg = sphere_segment(coords(a0), coords(a1), coords(beta))

    def path(s):
        return lam * (seg.at(s) @ E) ** 2

    return SegmentPath(nu_bar, mu0, mu1, path, name="fisher-rao")


# -- Bures–Wasserstein ------------------------------------------------------------------------


def sqrtm_psd(S) -> np.ndarray:
    """Symmetric square root via eigendecomposition with tiny eigenvalues set to 0."""
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    cutoff = EIG_CLAMP * max(1.0, float(lam[-1]))
    lam = np.where(lam > cutoff, lam, 0.0)
    return (V * np.sqrt(lam)) @ V.T


def bw_distance_sq(S1, S2) -> float:
    """tr S1 + tr S2 - 2 tr((S1^½ S2 S1^½)^½), clamped at 0 within 1e-10.

    The trace term equals the nuclear norm of S1^½ S2^½, which is what is
    computed: singular values avoid the square root of a nearly singular
    product.
    """
    S1, S2 = psd(S1), psd(S2)
    nuc = float(np.sum(np.linalg.svd(sqrtm_psd(S1) @ sqrtm_psd(S2), compute_uv=False)))
    val = float(np.trace(S1) + np.trace(S2) - 2.0 * nuc)
    if val < 0.0:
        if val < -1e-10 * max(1.0, float(np.trace(S1) + np.trace(S2))):
            raise ArithmeticError(f"negative Bures–Wasserstein value {val:.3g}")
        val = 0.0
    return val


def polar_factor(A) -> np.ndarray:
    """Orthogonal factor U of A = U P; for singular A any valid completion."""
    W, _, Vt = np.linalg.svd(A)
    return W @ Vt


def bw_segment(S0, S1, S2, endpoint_tol: float = 1e-8) -> SegmentPath:
    """M(s) = (1-s) S0^½ U0ᵀ + s S1^½ U1ᵀ and S(s) = M(s) M(s)ᵀ, base S2.

    U_i is the orthogonal polar factor of S2^½ S_i^½, which is
    (S2^½ S_i^½)(S_i^½ S2 S_i^½)^(-½) when that product is invertible.  It makes
    M_i = S_i^½ U_iᵀ the square root of S_i closest to S2^½.
    """
    S0, S1, S2 = psd(S0), psd(S1), psd(S2)
    R2 = sqrtm_psd(S2)
    Ms = []
    for S in (S0, S1):
        R = sqrtm_psd(S)
        U = polar_factor(R2 @ R)
        M = R @ U.T
        err = float(np.max(np.abs(M @ M.T - S), initial=0.0))
        if err > endpoint_tol * max(1.0, float(np.max(np.abs(S)))):
            raise ArithmeticError(f"bw_segment endpoint mismatch {err:.3g}")
        Ms.append(M)
    M0, M1 = Ms

    def path(s):
        M = (1 - s) * M0 + s * M1
        return M @ M.T

    seg = SegmentPath(S2, S0, S1, path, name="bures-wasserstein")
    seg.info.update(M0=M0, M1=M1)
    return seg


def bw_cost(n: int, p_rank_deficient: float = 0.3) -> CostSpace:
    def sampler(rng, k):
        out = []
        for _ in range(k):
            rank = int(rng.integers(1, n)) if rng.random() < p_rank_deficient else n
            out.append(random_psd(rng, n, rank))
        return out

    return CostSpace(fn=bw_distance_sq, name="bures-wasserstein", sampler=sampler, batch=bw_distance_sq_matrix)


def bw_distance_sq_matrix(xs, ys) -> np.ndarray:
    """Pairwise :func:`bw_distance_sq` with one square root per matrix."""
    Xs = [psd(S) for S in xs]
    Ys = [psd(S) for S in ys]
    RX = np.array([sqrtm_psd(S) for S in Xs])
    RY = np.array([sqrtm_psd(S) for S in Ys])
    nuc = np.linalg.svd(RX[:, None] @ RY[None, :], compute_uv=False).sum(axis=-1)
    tx = np.array([np.trace(S) for S in Xs])
    ty = np.array([np.trace(S) for S in Ys])
    val = tx[:, None] + ty[None, :] - 2.0 * nuc
    floor = -1e-10 * np.maximum(1.0, tx[:, None] + ty[None, :])
    if np.any(val < floor):
        raise ArithmeticError("negative Bures–Wasserstein value")
    return np.maximum(val, 0.0)


def sym_to_vec(S) -> np.ndarray:
    """Upper-triangular coordinates of a symmetric matrix."""
    S = np.asarray(S, dtype=float)
    return S[np.triu_indices(S.shape[0])]


def vec_to_sym(v, n: int) -> np.ndarray:
    S = np.zeros((n, n))
    S[np.triu_indices(n)] = v
    return S + np.triu(S, 1).T
