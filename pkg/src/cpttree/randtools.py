"""Constructive probability toolkit: uniform splitting, conditional-quantile
transport and uniformization.

These realize, at floating-point precision, the measure-theoretic devices
used to manufacture independent randomness: one uniform carries countably
many independent uniforms (binary digits dealt round-robin), a conditional
quantile transform couples a marginal with a kernel, and plugging a random
variable into its own atomless cdf yields a uniform independent of the
conditioning variable.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy.stats import chi2

from .errors import ValidationError
from .tree import PROB_TOL

_MANTISSA_BUDGET = 52

# Asymptotic Kolmogorov critical value at significance 0.01, scaled by 1/sqrt(n).
KS_CRITICAL_001 = 1.63


def _binary_digits(u: float, count: int) -> list[int]:
    digits = []
    frac = float(u)
    for _ in range(count):
        frac *= 2.0
        bit = int(frac)
        digits.append(bit)
        frac -= bit
    return digits


def split_uniform(u: float, l: int, bits: int) -> tuple[float, ...]:
    """Deal the binary digits of u round-robin into l values in [0, 1).

    Digit j goes to output j mod l. Each output receives ``bits`` digits, so
    bits * l must fit the double mantissa; exact on dyadic inputs. Use
    ``split_bitstring`` for arbitrary-precision input.
    """
    if not 0.0 <= u < 1.0:
        raise ValidationError("u must lie in [0, 1)")
    if l < 1 or bits < 1:
        raise ValidationError("need l >= 1 and bits >= 1")
    if bits * l > _MANTISSA_BUDGET:
        raise ValidationError(f"bits * l = {bits * l} exceeds the {_MANTISSA_BUDGET}-bit budget")
    digits = _binary_digits(u, bits * l)
    outs = []
    for i in range(l):
        val = 0.0
        for r in range(bits):
            val += digits[i + r * l] * 2.0 ** (-(r + 1))
        outs.append(val)
    return tuple(outs)


def split_bitstring(bits_str: str, l: int) -> tuple[str, ...]:
    """Round-robin deal of an explicit 0/1 string; no precision budget."""
    if l < 1:
        raise ValidationError("need l >= 1")
    if any(c not in "01" for c in bits_str):
        raise ValidationError("bit string must contain only 0 and 1")
    return tuple(bits_str[i::l] for i in range(l))


def recombine_uniform(parts: Sequence[float], bits: int) -> float:
    """Inverse deal: interleave the digit streams back into one uniform."""
    l = len(parts)
    if l < 1 or bits < 1:
        raise ValidationError("need at least one part and bits >= 1")
    if bits * l > _MANTISSA_BUDGET:
        raise ValidationError(f"bits * l = {bits * l} exceeds the {_MANTISSA_BUDGET}-bit budget")
    streams = [_binary_digits(p, bits) for p in parts]
    val = 0.0
    k = 0
    for r in range(bits):
        for i in range(l):
            k += 1
            val += streams[i][r] * 2.0 ** (-k)
    return val


@dataclass(frozen=True)
class FiniteJoint:
    """Finite joint law on (y, z) atoms, decomposed as marginal times kernel."""

    atoms: tuple[tuple[tuple[float, ...], tuple[float, ...], float], ...]

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ValidationError("joint law needs at least one atom")
        total = 0.0
        for _, _, p in self.atoms:
            if not 0.0 < p <= 1.0:
                raise ValidationError(f"atom probability {p} outside (0, 1]")
            total += p
        if abs(total - 1.0) > PROB_TOL:
            raise ValidationError(f"atom probabilities sum to {total!r}, not 1")

    @classmethod
    def from_list(
        cls, atoms: Sequence[tuple[Sequence[float] | float, Sequence[float] | float, float]]
    ) -> "FiniteJoint":
        def vec(v):
            return (float(v),) if np.isscalar(v) else tuple(float(x) for x in v)

        return cls(tuple((vec(y), vec(z), float(p)) for y, z, p in atoms))

    @cached_property
    def y_marginal(self) -> dict[tuple[float, ...], float]:
        out: dict[tuple[float, ...], float] = {}
        for y, _, p in self.atoms:
            out[y] = out.get(y, 0.0) + p
        return out

    def conditional(self, y: tuple[float, ...]) -> list[tuple[tuple[float, ...], float]]:
        """Conditional z-law given y, lexicographically sorted, merged atoms."""
        mass = self.y_marginal.get(y)
        if mass is None:
            nearest = min(self.y_marginal, key=lambda s: sum((a - b) ** 2 for a, b in zip(s, y)))
            raise ValidationError(
                f"y={y} outside the marginal support; nearest support point is {nearest}"
            )
        cond: dict[tuple[float, ...], float] = {}
        for yy, z, p in self.atoms:
            if yy == y:
                cond[z] = cond.get(z, 0.0) + p / mass
        return sorted(cond.items())


def _as_key(v: Sequence[float] | float) -> tuple[float, ...]:
    return (float(v),) if np.isscalar(v) else tuple(float(x) for x in v)


def transport(joint: FiniteJoint, y: Sequence[float] | float, e: float) -> tuple[float, ...]:
    """Conditional quantile of the kernel at y, driven by the uniform e.

    Integrating e over [0, 1) reproduces the conditional law exactly, so
    (Y, transport(Y, E)) with E uniform and independent has the joint law.
    """
    if not 0.0 <= e < 1.0:
        raise ValidationError("e must lie in [0, 1)")
    cond = joint.conditional(_as_key(y))
    cum = 0.0
    for z, p in cond:
        cum += p
        if e < cum:
            return z
    return cond[-1][0]


def transport_breakpoints(joint: FiniteJoint, y: Sequence[float] | float) -> tuple[float, ...]:
    """Cumulative boundaries of the conditional quantile intervals at y."""
    cond = joint.conditional(_as_key(y))
    cum = [0.0]
    for _, p in cond:
        cum.append(cum[-1] + p)
    cum[-1] = 1.0
    return tuple(cum)


def reconstruct_joint(joint: FiniteJoint) -> FiniteJoint:
    """Rebuild the joint from its marginal and transport over the breakpoint grid."""
    atoms = []
    for y, mass in joint.y_marginal.items():
        cuts = transport_breakpoints(joint, y)
        for a, b in zip(cuts, cuts[1:]):
            z = transport(joint, y, 0.5 * (a + b))
            atoms.append((y, z, mass * (b - a)))
    return FiniteJoint(tuple(atoms))


def tv_distance(a: FiniteJoint, b: FiniteJoint) -> float:
    """Total variation distance between two finite joints on merged atoms."""

    def merged(j: FiniteJoint) -> dict:
        out: dict = {}
        for y, z, p in j.atoms:
            out[(y, z)] = out.get((y, z), 0.0) + p
        return out

    ma, mb = merged(a), merged(b)
    keys = set(ma) | set(mb)
    return 0.5 * sum(abs(ma.get(k, 0.0) - mb.get(k, 0.0)) for k in keys)


def uniformize(
    F: Callable[[float], float],
    x: float,
    grid: Sequence[float] | None = None,
    atom_tol: float = 1e-3,
) -> float:
    """F(x) after checking F is a nondecreasing [0,1]-valued cdf on a grid.

    An apparent jump on the grid is bisected down to width 1e-9; a persisting
    mass gap means the law has an atom, which breaks the uniform-output
    guarantee, so a warning is emitted.
    """
    if grid is None:
        span = max(50.0, 2.0 * abs(x))
        grid = np.linspace(-span, span, 501)
    g = np.asarray(sorted(grid), dtype=float)
    vals = np.array([float(F(t)) for t in g])
    if np.any(vals < -1e-12) or np.any(vals > 1.0 + 1e-12):
        raise ValidationError("cdf values must lie in [0, 1]")
    if np.any(np.diff(vals) < -1e-12):
        raise ValidationError("cdf not monotone on the check grid")
    for i in np.nonzero(np.diff(vals) > atom_tol)[0]:
        lo, hi = float(g[i]), float(g[i + 1])
        flo, fhi = float(vals[i]), float(vals[i + 1])
        while hi - lo > 1e-9:
            mid = 0.5 * (lo + hi)
            fmid = float(F(mid))
            if fmid - flo > fhi - fmid:
                hi, fhi = mid, fmid
            else:
                lo, flo = mid, fmid
        if fhi - flo > 0.5 * atom_tol:
            warnings.warn(
                f"atomless law required: cdf jumps by {fhi - flo:.3g} near {lo:.6g}",
                stacklevel=2,
            )
            break
    return float(F(x))


def ks_uniform_statistic(samples: Sequence[float]) -> float:
    u = np.sort(np.asarray(samples, dtype=float))
    n = u.size
    if n == 0:
        raise ValidationError("need samples")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def ks_uniform_pass(samples: Sequence[float], significance: float = 0.01) -> tuple[bool, float, float]:
    """One-sample KS test against Uniform[0,1] at significance 0.01."""
    if significance != 0.01:
        raise ValidationError("only the documented 0.01 significance is supported")
    d = ks_uniform_statistic(samples)
    crit = KS_CRITICAL_001 / np.sqrt(len(samples))
    return d < crit, d, float(crit)


def chi2_independence_pass(
    a: Sequence[float], b: Sequence[float], bins: int = 4, significance: float = 0.01
) -> tuple[bool, float, float]:
    """Pearson chi-square independence test on a quantile-binned contingency grid."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.size != y.size or x.size == 0:
        raise ValidationError("need two equal-length nonempty samples")
    qx = np.quantile(x, np.linspace(0, 1, bins + 1)[1:-1])
    qy = np.quantile(y, np.linspace(0, 1, bins + 1)[1:-1])
    ix = np.searchsorted(qx, x, side="right")
    iy = np.searchsorted(qy, y, side="right")
    table = np.zeros((bins, bins))
    np.add.at(table, (ix, iy), 1.0)
    n = x.size
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    if np.any(expected == 0.0):
        raise ValidationError("degenerate binning: empty expected cell")
    stat = float(np.sum((table - expected) ** 2 / expected))
    crit = float(chi2.ppf(1.0 - significance, (bins - 1) ** 2))
    return stat < crit, stat, crit


def conditional_uniformize(
    samples: Sequence[tuple[float, float]],
    H: Callable[[float, float], float],
    H_left: Callable[[float, float], float] | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, bool]:
    """Apply the conditional cdf H(x | w) to each (x, w) sample.

    With an atomless conditional law the output is uniform and independent
    of w. Laws with atoms break that guarantee, so the randomized-rank
    extension u = H(x-|w) + V (H(x|w) - H(x-|w)) is applied instead and the
    output flagged: either pass the left limit H_left explicitly, or atoms
    are detected by probing H just below each sample point and the probed
    value serves as the left limit. Both paths need a generator for V.
    """
    probe = 1e-9
    atom_tol = 1e-6
    left_fn = H_left
    if left_fn is None:
        has_atoms = any(float(H(x, w)) - float(H(x - probe, w)) > atom_tol for x, w in samples)
        if has_atoms:
            warnings.warn(
                "conditional law has atoms; applying the randomized-rank extension",
                stacklevel=2,
            )
            left_fn = lambda x, w: H(x - probe, w)
    flagged = left_fn is not None
    if flagged and rng is None:
        raise ValidationError("the randomized-rank extension needs a generator")
    out = np.empty(len(samples))
    for i, (x, w) in enumerate(samples):
        hi = float(H(x, w))
        if flagged:
            lo = float(left_fn(x, w))
            if lo > hi + 1e-12:
                raise ValidationError("H_left must not exceed H")
            u = lo + float(rng.uniform()) * (hi - lo)
        else:
            u = hi
        if not -1e-12 <= u <= 1.0 + 1e-12:
            raise ValidationError("conditional cdf values must lie in [0, 1]")
        out[i] = min(1.0, max(0.0, u))
    return out, flagged


# --- seeded self-test suite --------------------------------------------------

SELF_TEST_SEED = 20240501


def _random_joint(rng: np.random.Generator, max_atoms: int = 20) -> FiniteJoint:
    n = int(rng.integers(2, max_atoms + 1))
    ys = rng.integers(0, 4, n).astype(float)
    zs = np.round(rng.normal(size=n), 3)
    w = rng.uniform(0.1, 1.0, n)
    w = w / w.sum()
    # exact unit mass: fold rounding into the largest atom
    w[np.argmax(w)] += 1.0 - w.sum()
    return FiniteJoint.from_list([(y, z, p) for y, z, p in zip(ys, zs, w)])


def toolkit_self_test(seed: int = SELF_TEST_SEED) -> dict:
    """Deterministic statistical suite; every check is seeded and reproducible."""
    rng = np.random.default_rng(seed)
    checks: list[dict] = []

    def record(name: str, passed: bool, statistic: float, threshold: float) -> None:
        checks.append(
            {"name": name, "passed": bool(passed), "statistic": float(statistic), "threshold": float(threshold)}
        )

    exact = split_uniform(0.5, 2, 8) == (0.5, 0.0) and split_uniform(0.75, 2, 8) == (0.5, 0.5)
    record("split_uniform_dyadic_exact", exact, 0.0 if exact else 1.0, 0.5)

    u = rng.random(100_000)
    parts = np.array([split_uniform(float(v), 2, 26) for v in u])
    ok, stat, crit = chi2_independence_pass(parts[:, 0], parts[:, 1])
    record("split_uniform_chi2_independence", ok, stat, crit)

    dyadic = [i / 64.0 for i in range(64)]
    round_trip = all(recombine_uniform(split_uniform(v, 2, 8), 8) == v for v in dyadic)
    record("split_recombine_dyadic", round_trip, 0.0 if round_trip else 1.0, 0.5)

    worst_tv = 0.0
    for _ in range(50):
        joint = _random_joint(rng)
        worst_tv = max(worst_tv, tv_distance(joint, reconstruct_joint(joint)))
    record("transport_reconstruction_tv", worst_tv <= 1e-12, worst_tv, 1e-12)

    x = rng.exponential(size=10_000)
    u_out = 1.0 - np.exp(-x)
    ok, stat, crit = ks_uniform_pass(u_out)
    record("uniformize_ks", ok, stat, crit)

    w = rng.uniform(0.0, 2.0, 10_000)
    xw = w + rng.exponential(size=10_000)
    u_cond, _ = conditional_uniformize(
        list(zip(xw, w)), lambda x_, w_: 1.0 - np.exp(-(x_ - w_))
    )
    ok1, stat1, crit1 = ks_uniform_pass(u_cond)
    record("conditional_uniformize_ks", ok1, stat1, crit1)
    ok2, stat2, crit2 = chi2_independence_pass(u_cond, w)
    record("conditional_uniformize_chi2", ok2, stat2, crit2)

    return {"seed": seed, "checks": checks, "all_passed": all(c["passed"] for c in checks)}
