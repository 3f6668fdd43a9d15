"""
Solver for the self-consistent system of s(α, z), density recovery by
Stieltjes inversion, and comparison with simulated spectra.

The solver works on numpy arrays of spectral parameters sharing one
imaginary part v, so a whole x-grid is advanced together along the
v-continuation ladder. Both forms are written in u = (w - α)/|z|², where s
is a rational function of u and the two equations collapse into one
polynomial in u (the eliminant). The first rung is seeded by a damped
fixed-point iteration. Every later rung lists the eliminant's roots, keeps
the admissible ones (Im s > 0, |s| <= 1/v, Im(w - α) >= 0) and follows the
one nearest to the solution extrapolated from the previous rungs. A complex
Newton step in u polishes the pick; u has no square-root branch, so the
polish stays on the tracked sheet where the two quadratic roots meet.
"""
import logging
import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import cumulative_trapezoid, trapezoid

from core.exception import BranchError, ConvergenceFailure, DomainError
from core.utils import write_csv
from spectra.services import EmpiricalCDF
from stieltjes.FormStrategy.StatementFormStrategy import StatementFormStrategy
from stieltjes.FormStrategy.TheoremFormStrategy import TheoremFormStrategy
from stieltjes.Interface.SystemFormInterface import SystemFormInterface
from stieltjes.models import DensityProfile, FormDiscriminationReport, StieltjesQuery, StieltjesSolution, SystemForm

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 2000
DEFAULT_DAMPING = 0.5
LADDER_START = 10.0
LADDER_RATIO = 0.85
NEWTON_SWITCH = 1e-8
FIXED_POINT_ITER = 200
MIN_DAMPING = 2.0 ** -20
LINE_SEARCH_HALVINGS = 30
BRANCH_SLACK = 1e-12
NEVANLINNA_SLACK = 1e-9
COEFFICIENT_FLOOR = 1e-14
INSUFFICIENT_RESOLUTION = 0.2

PROFILE_HEADER = ['x', 'eps', 'density', 's_re', 's_im', 'w_re', 'w_im', 'iters', 'residual']


def get_form_strategy(form) -> SystemFormInterface:
    if form == SystemForm.STATEMENT:
        return StatementFormStrategy()
    if form == SystemForm.THEOREM:
        return TheoremFormStrategy()
    raise DomainError(f"Unknown system form '{form}'.")


def continuation_ladder(v_target, start=LADDER_START, ratio=LADDER_RATIO):
    """v_k = start·ratio^k while above the target, then the target itself."""
    if v_target <= 0:
        raise DomainError("Continuation needs a positive target v.")
    ladder = []
    v = start
    while v > v_target:
        ladder.append(v)
        v *= ratio
    ladder.append(v_target)
    return ladder


def polynomial_roots(coefficients):
    """
    Roots of every row of an array of ascending coefficients, from the
    eigenvalues of stacked companion matrices.

    Leading columns that are negligible in every row are dropped first.
    Rows whose leading coefficient still vanishes get NaN roots.
    """
    coefficients = np.asarray(coefficients, dtype=complex)
    scale = np.max(np.abs(coefficients), axis=-1)
    degree = coefficients.shape[-1] - 1
    while degree > 0 and np.all(np.abs(coefficients[..., degree]) <= COEFFICIENT_FLOOR * scale):
        degree -= 1
    if degree == 0:
        return np.empty(coefficients.shape[:-1] + (0,), dtype=complex)

    lead = coefficients[..., degree]
    usable = lead != 0
    companion = np.zeros(coefficients.shape[:-1] + (degree, degree), dtype=complex)
    companion[..., np.arange(1, degree), np.arange(degree - 1)] = 1.0
    companion[..., :, -1] = -coefficients[..., :degree] / np.where(usable, lead, 1.0)[..., None]
    try:
        roots = np.linalg.eigvals(companion)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"Companion eigenvalues failed: {exc}")
    return np.where(usable[..., None], roots, np.nan)


class _System:
    """The two equations of one form at fixed α (array), z and m."""

    def __init__(self, strategy: SystemFormInterface, m, z, alpha):
        self.strategy = strategy
        self.m = m
        self.k = strategy.w_power(m)
        self.sign = (-1) ** (m + 1)
        self.z2 = abs(complex(z)) ** 2
        self.alpha = np.asarray(alpha, dtype=complex)
        self.numerator, self.denominator = strategy.s_fraction(self.z2)

    @property
    def v(self):
        return self.alpha.imag

    def first_terms(self, s, t):
        w = self.alpha + t
        return w, w * s, self.sign * w ** self.k * s ** (self.m + 1)

    def first_residual(self, s, t):
        _, a, b = self.first_terms(s, t)
        return np.abs(1.0 + a + b) / (1.0 + np.abs(a) + np.abs(b))

    def second_residual(self, s, t):
        terms = self.strategy.quadratic_terms(s, t, self.z2)
        return np.abs(sum(terms)) / (1.0 + sum(np.abs(term) for term in terms))

    def branch_ok(self, t):
        return (t.imag > 0) | ((self.z2 == 0) & (np.abs(t) <= BRANCH_SLACK))

    def admissible(self, s, t, v):
        return (
            np.isfinite(s) & (s.imag > 0) & (np.abs(s) <= (1.0 + NEVANLINNA_SLACK) / v)
            & (t.imag >= -BRANCH_SLACK)
        )

    # Fixed-point stage, in (s, t).

    def select_root(self, s, reference):
        """
        Root of the quadratic nearest to `reference` among those with
        Im t >= 0 (up to BRANCH_SLACK). Starting from reference 0 this is
        the small root. Returns the root and a mask of points where some
        root qualifies.
        """
        small, large = self.strategy.roots(s, self.z2)
        small_ok = small.imag >= -BRANCH_SLACK
        large_ok = large.imag >= -BRANCH_SLACK
        small_nearer = np.abs(small - reference) <= np.abs(large - reference)
        use_small = small_ok & (~large_ok | small_nearer)
        return np.where(use_small, small, large), small_ok | large_ok

    def fixed_point(self, s, t):
        w = self.alpha + t
        return -1.0 / (w + self.sign * w ** self.k * s ** self.m)

    # Newton stage and root listing, in u.

    def s_of(self, u):
        return P.polyval(u, self.numerator) / P.polyval(u, self.denominator)

    def ds_du(self, u):
        denominator = P.polyval(u, self.denominator)
        return (
            P.polyval(u, P.polyder(self.numerator)) * denominator
            - P.polyval(u, self.numerator) * P.polyval(u, P.polyder(self.denominator))
        ) / denominator ** 2

    def state(self, u):
        s = self.s_of(u)
        t = self.z2 * u
        return s, t, self.first_residual(s, t), self.second_residual(s, t)

    def newton_step(self, u):
        s = self.s_of(u)
        w, a, b = self.first_terms(s, self.z2 * u)
        d_ds = w + self.sign * (self.m + 1) * w ** self.k * s ** self.m
        d_dw = s + self.sign * self.k * w ** (self.k - 1) * s ** (self.m + 1)
        return (1.0 + a + b) / (d_ds * self.ds_du(u) + d_dw * self.z2)

    def eliminant(self):
        """
        Coefficients in u (ascending, one row per α) of
        D^(m+1) + w·N·D^m + σ·w^k·N^(m+1) with s = N/D and w = α + |z|²u.
        """
        numerator, denominator = self.numerator, self.denominator
        shift = np.array([0.0, self.z2])
        mixed = P.polymul(numerator, P.polypow(denominator, self.m))
        top = P.polypow(numerator, self.m + 1)
        # parts[j] multiplies α^j.
        parts = [P.polyadd(P.polypow(denominator, self.m + 1), P.polymul(shift, mixed)), mixed]
        parts += [np.zeros(1)] * (self.k + 1 - len(parts))
        for j in range(self.k + 1):
            term = self.sign * math.comb(self.k, j) * P.polymul(P.polypow(shift, self.k - j), top)
            parts[j] = P.polyadd(parts[j], term)

        width = max(part.size for part in parts)
        coefficients = np.zeros(self.alpha.shape + (width,), dtype=complex)
        for power, part in enumerate(parts):
            coefficients[..., :part.size] += self.alpha[..., None] ** power * part
        return coefficients

    def nearest_root(self, reference):
        """
        The eliminant's admissible root whose s lies nearest to `reference`,
        and a mask of points where an admissible root exists. Points without
        one get the nearest finite root.
        """
        roots = polynomial_roots(self.eliminant())
        s = self.s_of(roots)
        t = self.z2 * roots
        finite = np.isfinite(s) & np.isfinite(roots)
        distance = np.where(finite, np.abs(s - reference[..., None]), np.inf)
        admissible = finite & self.admissible(s, t, self.v[..., None])
        found = admissible.any(axis=-1)
        ranked = np.where(found[..., None], np.where(admissible, distance, np.inf), distance)
        pick = np.argmin(ranked, axis=-1)
        return np.take_along_axis(roots, pick[..., None], axis=-1)[..., 0], found


def _fixed_point(system: _System, s, tol, max_iter, damping):
    """Damped fixed point; a step that raises the residual halves that point's damping."""
    s = np.array(s, dtype=complex)
    t, has_root = system.select_root(s, np.zeros_like(s))
    residual = system.first_residual(s, t)
    lam = np.full(s.shape, float(damping))
    iterations = np.zeros(s.shape, dtype=int)

    for _ in range(min(FIXED_POINT_ITER, max_iter)):
        active = (residual > max(tol, NEWTON_SWITCH)) & (lam >= MIN_DAMPING) & has_root
        if not active.any():
            break
        candidate = np.where(active, (1.0 - lam) * s + lam * system.fixed_point(s, t), s)
        cand_t, cand_has_root = system.select_root(candidate, t)
        cand_residual = system.first_residual(candidate, cand_t)
        accept = active & cand_has_root & (candidate.imag > 0) & (cand_residual <= residual)
        s = np.where(accept, candidate, s)
        t = np.where(accept, cand_t, t)
        residual = np.where(accept, cand_residual, residual)
        lam = np.where(active & ~accept, lam / 2.0, lam)
        iterations += active
    return s, t, has_root, iterations


def _polish(system: _System, u, iterations, tol, max_iter, active=None):
    """Complex Newton in u with backtracking on the first residual."""
    _, _, residual, _ = system.state(u)
    stalled = np.zeros(u.shape, dtype=bool) if active is None else ~active
    while True:
        active = (residual > tol) & (iterations < max_iter) & ~stalled
        if not active.any():
            break
        step = np.where(active, system.newton_step(u), 0.0)
        scale = np.ones(u.shape)
        for _ in range(LINE_SEARCH_HALVINGS):
            candidate = u - scale * step
            _, _, cand_residual, _ = system.state(candidate)
            ok = np.isfinite(cand_residual) & (cand_residual < residual)
            retry = active & ~ok
            if not retry.any():
                break
            scale = np.where(retry, scale / 2.0, scale)
        accept = active & ok
        stalled |= active & ~ok
        u = np.where(accept, candidate, u)
        residual = np.where(accept, cand_residual, residual)
        iterations = iterations + active
    return u, iterations


def _solve_rung(system: _System, reference, tol, max_iter, damping, seed):
    """
    One rung of the ladder. With `seed` the damped fixed point runs from
    `reference` and the eliminant is only consulted where it fails;
    otherwise every point takes the admissible root nearest to `reference`.
    Each stage spends from the same per-rung budget of `max_iter`.
    """
    if seed:
        s, t, found, iterations = _fixed_point(system, reference, tol, max_iter, damping)
        u, iterations = _polish(system, system.strategy.u_of(s, t), iterations, tol, max_iter)
        s, t, first, second = system.state(u)
        accepted = (first <= tol) & (second <= tol) & system.admissible(s, t, system.v)
        retry = ~accepted & (iterations < max_iter)
    else:
        u = np.full(reference.shape, np.nan, dtype=complex)
        found = np.zeros(reference.shape, dtype=bool)
        iterations = np.zeros(reference.shape, dtype=int)
        retry = np.ones(reference.shape, dtype=bool)

    if retry.any():
        root, root_found = system.nearest_root(reference)
        u = np.where(retry, root, u)
        found = np.where(retry, root_found, found)
        iterations = iterations + retry
        u, iterations = _polish(system, u, iterations, tol, max_iter, active=retry)

    s, t, first, second = system.state(u)
    converged = (first <= tol) & (second <= tol)
    return s, t, first, second, iterations, converged, found & system.branch_ok(t)


def _extrapolate(history, v):
    """Linear prediction of s at v from the last two rungs (or the last one)."""
    v_last, s_last = history[-1]
    if len(history) < 2:
        return s_last
    v_before, s_before = history[-2]
    prediction = s_last + (s_last - s_before) * (v - v_last) / (v_last - v_before)
    return np.where(np.isfinite(prediction), prediction, s_last)


def _solve_batch(x, v, z, m, form, init=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 damping=DEFAULT_DAMPING, continuation=True):
    if tol <= 0:
        raise DomainError("Solver tolerance must be positive.")
    if not 0 < damping <= 1:
        raise DomainError("Damping must lie in (0, 1].")
    strategy = get_form_strategy(form)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    ladder = continuation_ladder(v) if continuation else [v]
    if init is None:
        start = -1.0 / (x + 1j * ladder[0])
    else:
        start = np.broadcast_to(np.asarray(init, dtype=complex), x.shape).copy()
    total_iterations = np.zeros(x.shape, dtype=int)
    history = []

    with np.errstate(all='ignore'):
        for rung, rung_v in enumerate(ladder):
            system = _System(strategy, m, z, x + 1j * rung_v)
            if history:
                reference = _extrapolate(history, rung_v)
                # A point lost on an earlier rung restarts from the large-|α| guess.
                reference = np.where(np.isfinite(reference), reference, -1.0 / system.alpha)
            else:
                reference = start
            final = rung == len(ladder) - 1
            s, t, first, second, iterations, converged, branch = _solve_rung(
                system, reference, tol if final else max(tol, NEWTON_SWITCH), max_iter, damping, seed=rung == 0,
            )
            total_iterations += iterations
            history = history[-1:] + [(rung_v, s)]
        logger.debug(
            "form=%s m=%d z=%s v=%.3g: %d/%d converged after %d rungs",
            form, m, z, v, int(converged.sum()), x.size, len(ladder),
        )
        nevanlinna = (s.imag > 0) & (np.abs(s) <= (1.0 + NEVANLINNA_SLACK) / v)
    return {
        's': s,
        'w': system.alpha + t,
        'first': first,
        'second': second,
        'iterations': total_iterations,
        'converged': converged,
        'branch_ok': branch,
        'nevanlinna': nevanlinna,
    }


def solve_system(query: StieltjesQuery, init=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                 damping=DEFAULT_DAMPING, continuation=True) -> StieltjesSolution:
    """
    Solve for s(α, z) and w(α, z).

    A damped fixed point started at s₀ = -1/α (or `init`) solves the rung
    v = 10; the admissible root nearest to the extrapolated solution is then
    followed down the ladder v_k = 10·0.85^k to the target Im α. Without
    `continuation` the fixed point runs at the target directly. Raises
    BranchError when no root keeps Im(w - α) >= 0 or the result leaves the
    upper half-plane, ConvergenceFailure when the residuals stay above `tol`.
    """
    result = _solve_batch(
        query.alpha.real, query.v, query.z, query.m, query.form,
        init=init, tol=tol, max_iter=max_iter, damping=damping, continuation=continuation,
    )
    residuals = (float(result['first'][0]), float(result['second'][0]))
    iterations = int(result['iterations'][0])
    if not result['branch_ok'][0]:
        raise BranchError(f"No admissible quadratic root for alpha={query.alpha}, z={query.z}.")
    if not result['converged'][0]:
        raise ConvergenceFailure(
            f"Solver stopped at residuals {residuals[0]:.3e}, {residuals[1]:.3e} "
            f"after {iterations} iterations.",
            residuals={'first': residuals[0], 'second': residuals[1]},
            iterations=iterations,
        )
    if not result['nevanlinna'][0]:
        raise BranchError(f"Converged to a root outside the Nevanlinna class: s={complex(result['s'][0])}.")
    return StieltjesSolution(
        s=complex(result['s'][0]),
        w=complex(result['w'][0]),
        residuals=residuals,
        iterations=iterations,
        branch_ok=True,
        query=query,
    )


def density_from_inversion(z, m, form, x_grid, eps, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER) -> DensityProfile:
    """(1/π)·Im s(x + iε, z) on `x_grid`; failed points are recorded, not raised."""
    if eps <= 0:
        raise DomainError("Inversion needs eps > 0.")
    x = np.asarray(x_grid, dtype=float)
    if x.size == 0:
        raise DomainError("Empty x grid.")
    result = _solve_batch(x, eps, z, m, form, tol=tol, max_iter=max_iter)
    ok = result['converged'] & result['branch_ok'] & result['nevanlinna']
    s = result['s']
    density = np.where(ok, np.maximum(s.imag, 0.0) / math.pi, np.nan)
    density = np.where(ok & (np.abs(s.imag) < tol), 0.0, density)

    failures = []
    for index in np.flatnonzero(~ok):
        if not result['branch_ok'][index]:
            reason = 'branch'
        elif not result['converged'][index]:
            reason = 'convergence'
        else:
            reason = 'nevanlinna'
        failures.append({'x': float(x[index]), 'reason': reason})
    if failures:
        logger.warning("%d of %d grid points failed for form=%s z=%s", len(failures), x.size, form, z)

    return DensityProfile(
        x=x,
        eps=float(eps),
        z=complex(z),
        m=m,
        form=form,
        density=density,
        s=s,
        w=result['w'],
        iterations=result['iterations'],
        residuals=np.maximum(result['first'], result['second']),
        failures=failures,
    )


def recovered_moment(profile: DensityProfile, order):
    """∫ x^order of the recovered density over the grid (trapezoid)."""
    return float(trapezoid(profile.x ** order * profile.finite_density, profile.x))


def extrapolated_moment(z, m, form, x_grid, eps, order):
    """
    Moment of the unsmoothed law from profiles at eps and 2·eps.

    Poisson smoothing shifts a truncated moment by a term linear in eps;
    2·M(eps) - M(2·eps) cancels it.
    """
    fine = recovered_moment(density_from_inversion(z, m, form, x_grid, eps), order)
    coarse = recovered_moment(density_from_inversion(z, m, form, x_grid, 2 * eps), order)
    return 2.0 * fine - coarse


def integrated_cdf(profile: DensityProfile):
    """
    Cumulative trapezoid of the density, normalized by its total mass.
    Failed points count as zero density; the mass they lose is logged.
    """
    cumulative = cumulative_trapezoid(profile.finite_density, profile.x, initial=0.0)
    total = cumulative[-1]
    if not total > 0:
        raise DomainError("Recovered density has no mass on the grid.")
    if profile.failures:
        logger.warning(
            "CDF of form=%s z=%s renormalized from mass %.4f with %d failed points",
            profile.form, profile.z, total, len(profile.failures),
        )
    return cumulative / total


def profile_cdf(profile: DensityProfile):
    """The integrated CDF as a callable, 0 left of the grid and 1 right of it."""
    values = integrated_cdf(profile)

    def cdf(x):
        return np.interp(x, profile.x, values, left=0.0, right=1.0)
    return cdf


def compare_with_empirical(profile: DensityProfile, spectrum) -> float:
    """Kolmogorov distance Δ_n(z) between a symmetrized spectrum and the recovered CDF."""
    values = getattr(spectrum, 'values', spectrum)
    if np.asarray(values).size == 0:
        raise DomainError("Spectrum is empty.")
    return EmpiricalCDF(values).sup_distance(profile_cdf(profile))


def profile_distance(first: DensityProfile, second: DensityProfile) -> float:
    """sup |F_1 - F_2| of two recovered CDFs on the union of their grids."""
    grid = np.union1d(first.x, second.x)
    return float(np.max(np.abs(profile_cdf(first)(grid) - profile_cdf(second)(grid))))


def form_discrimination(z, m, spectra, x_grid, eps, forms=SystemForm.CHOICES) -> FormDiscriminationReport:
    """
    Run compare_with_empirical under each form against the same simulated
    spectra and pick the form with the smaller mean distance.
    """
    if not spectra:
        raise DomainError("Form discrimination needs at least one spectrum.")
    distances, per_trial, failures = {}, {}, {}
    for form in forms:
        try:
            profile = density_from_inversion(z, m, form, x_grid, eps)
            trial_distances = [compare_with_empirical(profile, spectrum) for spectrum in spectra]
        except (DomainError, ConvergenceFailure) as exc:
            failures[form] = str(exc.detail)
            distances[form] = math.inf
            per_trial[form] = []
            continue
        if profile.failures:
            failures[form] = f"{len(profile.failures)} grid points failed"
        per_trial[form] = trial_distances
        distances[form] = float(np.mean(trial_distances))

    ranked = sorted(distances, key=lambda form: distances[form])
    winner = ranked[0] if math.isfinite(distances[ranked[0]]) else None
    margin = distances[ranked[1]] - distances[ranked[0]] if len(ranked) > 1 and winner else 0.0
    insufficient = all(distance > INSUFFICIENT_RESOLUTION for distance in distances.values())
    if insufficient:
        logger.warning("form discrimination at z=%s: both forms exceed %.2f", z, INSUFFICIENT_RESOLUTION)
    return FormDiscriminationReport(
        z=complex(z),
        m=m,
        distances=distances,
        per_trial=per_trial,
        winner=winner,
        margin=margin,
        insufficient_resolution=insufficient,
        failures=failures,
    )


def export_profile_csv(path, profile: DensityProfile):
    return write_csv(path, PROFILE_HEADER, profile.rows())
