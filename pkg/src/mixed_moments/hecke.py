"""Hecke eigenvalues of the cusp form feeding every Dirichlet series.

The built-in form is the discriminant Delta (weight 12, level 1), whose
coefficients tau(n) are generated exactly from q * prod_{m>=1} (1 - q^m)^24.
Other forms (Maass forms in particular) are only supported through
coefficient files.
"""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
import os
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import gmpy2
import numpy as np

log = logging.getLogger(__name__)

CACHE_MAGIC = b"HCF1"
CACHE_VERSION = 1
DEFAULT_CAPACITY = 5_000_000


class CoefficientError(ValueError):
    """Base class for coefficient table failures."""


class CapacityError(CoefficientError):
    pass


class CoefficientParseError(CoefficientError):
    pass


class InvariantViolation(CoefficientError):
    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


class DeligneWarning(UserWarning):
    pass


class Source(str, enum.Enum):
    GENERATED_DELTA = "generated_delta"
    INGESTED_FILE = "ingested_file"


@dataclass(frozen=True)
class FormDescriptor:
    """Gamma data of a self-contained L-function.

    gamma(s) = pi^{-d s/2} prod_j Gamma((s - kappa_j)/2) and
    Lambda(s) = q^{s/2} gamma(s) L(s) = root_number * Lambda(1 - s, dual).
    """

    degree: int
    kappa: tuple[complex, ...]
    conductor: int = 1
    root_number: complex = 1.0
    self_dual: bool = True
    name: str = ""
    # Lambda has simple poles at s = 0 and s = 1 (only zeta here).
    polar: bool = False

    def __post_init__(self):
        if self.degree < 1 or len(self.kappa) != self.degree:
            raise ValueError("kappa must have exactly `degree` entries")
        if any(complex(k).real >= 0.5 for k in self.kappa):
            raise ValueError("every gamma shift needs Re(kappa) < 1/2")
        if self.conductor < 1:
            raise ValueError("conductor must be a positive integer")
        if abs(abs(complex(self.root_number)) - 1.0) > 1e-12:
            raise ValueError("root number must have modulus 1")


ZETA = FormDescriptor(degree=1, kappa=(0.0,), name="zeta", polar=True)
# Gamma(s + 11/2) (2 pi)^{-s} equals pi^{-s} Gamma((s+11/2)/2) Gamma((s+13/2)/2)
# up to a constant (duplication formula), so the shifts are -11/2 and -13/2.
DELTA = FormDescriptor(degree=2, kappa=(-5.5, -6.5), name="delta")


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    values: np.ndarray
    source: Source = Source.GENERATED_DELTA
    exact_values: tuple[int, ...] | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise CoefficientError("a coefficient table needs at least lambda(1)")

    @property
    def n_max(self) -> int:
        return int(self.values.size)

    def __getitem__(self, n: int) -> float:
        return lambda_value(self, n)

    def __eq__(self, other):
        if not isinstance(other, CoefficientTable):
            return NotImplemented
        return (
            self.source == other.source
            and self.exact_values == other.exact_values
            and np.array_equal(self.values, other.values)
        )

    def prefix(self, n: int) -> np.ndarray:
        """lambda(1..n) as a read-only view."""
        if n > self.n_max:
            raise InsufficientCoefficients(n, self.n_max)
        return self.values[:n]


class InsufficientCoefficients(CoefficientError):
    def __init__(self, required: int, available: int):
        super().__init__(
            f"coefficient table has n_max={available}, need n_max >= {required}"
        )
        self.required = required
        self.available = available


# ---------------------------------------------------------------------------
# exact generation


def _pack(coeffs: list[int], bits: int) -> int:
    nbytes = bits // 8
    pos = b"".join((c if c > 0 else 0).to_bytes(nbytes, "little") for c in coeffs)
    neg = b"".join((-c if c < 0 else 0).to_bytes(nbytes, "little") for c in coeffs)
    return int.from_bytes(pos, "little") - int.from_bytes(neg, "little")


def _unpack(value, length: int, bits: int) -> list[int]:
    nbytes = bits // 8
    half = 1 << (bits - 1)
    offset = int.from_bytes((half.to_bytes(nbytes, "little")) * length, "little")
    low = (int(value) + offset) & ((1 << (bits * length)) - 1)
    raw = low.to_bytes(nbytes * length, "little")
    return [
        int.from_bytes(raw[i * nbytes : (i + 1) * nbytes], "little") - half
        for i in range(length)
    ]


def _square_truncated(coeffs: list[int], length: int, bits: int) -> list[int]:
    # Kronecker substitution: one big-integer product per squaring.
    x = gmpy2.mpz(_pack(coeffs, bits))
    return _unpack(x * x, length, bits)


def eta_cube(length: int) -> list[int]:
    """Coefficients of prod (1 - q^m)^3 below q^length (Jacobi's identity)."""
    out = [0] * length
    k = 0
    while True:
        e = k * (k + 1) // 2
        if e >= length:
            break
        out[e] = (-1) ** k * (2 * k + 1)
        k += 1
    return out


def tau_values(n_max: int) -> list[int]:
    """Exact tau(1..n_max)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    length = n_max
    # |tau(n)| <= d(n) n^{11/2}; intermediate powers are smaller.
    need = 6.0 * math.log2(length + 2) + 48
    bits = 64 * math.ceil(need / 64)
    poly = eta_cube(length)
    for _ in range(3):  # (eta^3)^8 = eta^24
        poly = _square_truncated(poly, length, bits)
    return poly


def _normalize(tau: list[int]) -> np.ndarray:
    ctx = gmpy2.get_context()
    old = ctx.precision
    ctx.precision = 128
    try:
        half = gmpy2.mpfr(11) / 2
        out = np.empty(len(tau))
        for i, t in enumerate(tau):
            n = gmpy2.mpfr(i + 1)
            out[i] = float(gmpy2.mpfr(t) / n**half)
    finally:
        ctx.precision = old
    return out


def generate_tau_table(n_max: int, capacity: int = DEFAULT_CAPACITY) -> CoefficientTable:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if n_max > capacity:
        raise CapacityError(f"n_max={n_max} exceeds the configured budget {capacity}")
    tau = tau_values(n_max)
    return CoefficientTable(
        values=_normalize(tau),
        source=Source.GENERATED_DELTA,
        exact_values=tuple(tau),
    )


def lambda_value(table: CoefficientTable, n: int) -> float:
    if not 1 <= n <= table.n_max:
        raise IndexError(f"n={n} outside 1..{table.n_max}")
    return float(table.values[n - 1])


# ---------------------------------------------------------------------------
# invariants


def divisor_counts(n_max: int) -> np.ndarray:
    d = np.zeros(n_max + 1, dtype=np.int64)
    for k in range(1, n_max + 1):
        d[k::k] += 1
    return d[1:]


def _coprime_pairs(n_max: int, limit: int | None = None):
    """Yield (m, array of n) with 2 <= m < n, gcd(m, n) = 1, m*n <= n_max."""
    top = int(math.isqrt(n_max))
    for m in range(2, top + 1):
        hi = n_max // m
        if limit is not None:
            hi = min(hi, limit)
        if hi <= m:
            continue
        ns = np.arange(m + 1, hi + 1)
        ns = ns[np.gcd(ns, m) == 1]
        if ns.size:
            yield m, ns


@dataclass
class InvariantReport:
    n_max: int
    pairs_checked: int = 0
    prime_powers_checked: int = 0
    deligne_violations: list[int] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    first_failing_pair: tuple[int, int] | None = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        state = "OK" if self.ok else "FAIL"
        return (
            f"{state}: n_max={self.n_max} coprime_pairs={self.pairs_checked} "
            f"prime_powers={self.prime_powers_checked} "
            f"deligne_violations={len(self.deligne_violations)}"
        )


def _primes_upto(n: int) -> list[int]:
    if n < 2:
        return []
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return [int(p) for p in np.flatnonzero(sieve)]


def check_invariants(
    table: CoefficientTable, rtol: float = 4 * np.finfo(float).eps, atol: float = 0.0
) -> InvariantReport:
    """Check lambda(1)=1, multiplicativity, Hecke recursion and Deligne's bound.

    Exact-integer checks run when the table carries tau values; the float
    checks use |lambda(mn) - lambda(m)lambda(n)| <= atol + rtol*|lambda(mn)|
    with a few ulp of slack for the product rounding.
    """
    n_max = table.n_max
    lam = table.values
    rep = InvariantReport(n_max=n_max)
    if lam[0] != 1.0:
        rep.failures.append(f"lambda(1) = {lam[0]!r}, expected 1")
        rep.first_failing_pair = (1, 1)
        return rep

    tau = table.exact_values
    for m, ns in _coprime_pairs(n_max):
        rep.pairs_checked += ns.size
        prod = ns * m
        if tau is not None:
            bad = [int(n) for n in ns if tau[m * n - 1] != tau[m - 1] * tau[n - 1]]
            if bad:
                rep.failures.append(f"tau({m}*{bad[0]}) != tau({m}) tau({bad[0]})")
                rep.first_failing_pair = rep.first_failing_pair or (m, bad[0])
                break
        lhs = lam[prod - 1]
        rhs = lam[m - 1] * lam[ns - 1]
        tol = atol + rtol * np.maximum(np.abs(lhs), np.abs(rhs)) + 4 * np.finfo(float).tiny
        off = np.abs(lhs - rhs) > tol
        if off.any():
            n = int(ns[np.argmax(off)])
            rep.failures.append(
                f"lambda({m * n}) = {lam[m * n - 1]!r} but lambda({m})*lambda({n}) = "
                f"{lam[m - 1] * lam[n - 1]!r}"
            )
            rep.first_failing_pair = rep.first_failing_pair or (m, n)
            break

    if tau is not None:
        for p in _primes_upto(n_max):
            pk, prev = p, 1  # p^k and p^{k-1}
            p11 = p**11
            while pk * p <= n_max:
                rep.prime_powers_checked += 1
                if tau[pk * p - 1] != tau[p - 1] * tau[pk - 1] - p11 * tau[prev - 1]:
                    rep.failures.append(f"Hecke recursion fails at p={p}, p^k={pk}")
                    rep.first_failing_pair = rep.first_failing_pair or (p, pk)
                    break
                prev, pk = pk, pk * p

    d = divisor_counts(n_max)
    over = np.flatnonzero(np.abs(lam) > d * (1 + 1e-12))
    rep.deligne_violations = [int(i) + 1 for i in over]
    return rep


# ---------------------------------------------------------------------------
# files


def emit_coefficients(table: CoefficientTable, path: str | os.PathLike | None = None) -> str:
    """Write the CSV coefficient format; returns the text as well."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if table.exact_values is not None:
        w.writerow(["n", "lambda", "tau"])
        for i, (v, t) in enumerate(zip(table.values, table.exact_values)):
            w.writerow([i + 1, repr(float(v)), t])
    else:
        w.writerow(["n", "lambda"])
        for i, v in enumerate(table.values):
            w.writerow([i + 1, repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_coefficients(text: str) -> tuple[np.ndarray, tuple[int, ...] | None]:
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise CoefficientParseError("empty coefficient file")
    header = [c.strip().lower() for c in rows[0]]
    first = 2
    if header and header[0] == "n":
        if header not in (["n", "lambda"], ["n", "lambda", "tau"]):
            raise CoefficientParseError(f"bad header {rows[0]!r}; expected 'n,lambda[,tau]'")
    else:
        # headerless two-column rows
        header, first = ["n", "lambda"], 1
    has_tau = len(header) == 3
    values, taus = [], []
    for lineno, row in enumerate(rows[first - 1 :], start=first):
        if len(row) != len(header):
            raise CoefficientParseError(f"line {lineno}: expected {len(header)} columns")
        try:
            n = int(row[0])
            v = float(row[1])
            t = int(row[2]) if has_tau else None
        except ValueError as exc:
            raise CoefficientParseError(f"line {lineno}: {exc}") from None
        if n != len(values) + 1:
            raise CoefficientParseError(
                f"line {lineno}: rows must be contiguous from n=1, got n={n}"
            )
        if not math.isfinite(v):
            raise CoefficientParseError(f"line {lineno}: non-finite lambda")
        values.append(v)
        taus.append(t)
    if not values:
        raise CoefficientParseError("no coefficient rows")
    return np.array(values), (tuple(taus) if has_tau else None)


def ingest_coefficients(
    path: str | os.PathLike, rtol: float = 1e-8, atol: float = 1e-9
) -> CoefficientTable:
    """Load a coefficient file and validate it.

    Deligne-bound violations only warn; any other failed invariant raises
    InvariantViolation naming the first failing pair.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CoefficientParseError(f"{path}: not UTF-8 ({exc})") from None
    values, taus = parse_coefficients(text)
    table = CoefficientTable(values=values, source=Source.INGESTED_FILE, exact_values=taus)
    rep = check_invariants(table, rtol=rtol, atol=atol)
    if not rep.ok:
        raise InvariantViolation("; ".join(rep.failures), rep.first_failing_pair)
    notes = ()
    if rep.deligne_violations:
        msg = (
            f"{len(rep.deligne_violations)} coefficient(s) exceed the divisor bound, "
            f"first at n={rep.deligne_violations[0]}"
        )
        warnings.warn(msg, DeligneWarning, stacklevel=2)
        notes = (msg,)
    log.info("ingested %s: %s", path, rep.summary())
    return CoefficientTable(
        values=values, source=Source.INGESTED_FILE, exact_values=taus, warnings=notes
    )


def write_cache(table: CoefficientTable, path: str | os.PathLike) -> None:
    payload = CACHE_MAGIC + struct.pack("<Q", table.n_max)
    payload += np.ascontiguousarray(table.values, dtype="<f8").tobytes()
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def read_cache(path: str | os.PathLike) -> CoefficientTable:
    raw = Path(path).read_bytes()
    if raw[:4] != CACHE_MAGIC or len(raw) < 12:
        raise CoefficientParseError(f"{path}: not an HCF1 cache file")
    (n_max,) = struct.unpack("<Q", raw[4:12])
    if len(raw) != 12 + 8 * n_max:
        raise CoefficientParseError(f"{path}: truncated cache (n_max={n_max})")
    values = np.frombuffer(raw, dtype="<f8", offset=12, count=n_max).astype(np.float64)
    return CoefficientTable(values=values, source=Source.GENERATED_DELTA)


def default_cache_dir() -> Path:
    env = os.environ.get("MML_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "mixed_moments"


def cache_path(n_max: int, cache_dir: str | os.PathLike | None = None) -> Path:
    root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    return root / f"delta_v{CACHE_VERSION}_{n_max}.hcf1"


def load_or_generate(
    n_max: int, cache_dir: str | os.PathLike | None = None, capacity: int = DEFAULT_CAPACITY
) -> tuple[CoefficientTable, bool]:
    """Return (table, cache_hit). Tables read back from cache carry no tau."""
    path = cache_path(n_max, cache_dir)
    if path.exists():
        try:
            table = read_cache(path)
            log.info("coefficient cache hit: %s", path)
            return table, True
        except CoefficientParseError:
            log.warning("ignoring unreadable cache %s", path)
    table = generate_tau_table(n_max, capacity=capacity)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_cache(table, path)
    return table, False


# ---------------------------------------------------------------------------
# statistics


def additive_twist_sum(table: CoefficientTable, x: float, alpha: float) -> complex:
    """sum_{n <= x} lambda(n) e(alpha n), summed with exact rounding per component."""
    n = int(math.floor(x))
    if n < 1 or n > table.n_max:
        raise IndexError(f"x={x} outside the table range 1..{table.n_max}")
    lam = table.values[:n]
    k = np.arange(1, n + 1, dtype=np.float64)
    # reduce alpha*n mod 1 before taking the phase
    frac = np.mod(alpha * k, 1.0) if abs(alpha) * n < 2**52 else alpha * k
    ph = 2 * np.pi * frac
    return complex(math.fsum(lam * np.cos(ph)), math.fsum(lam * np.sin(ph)))


def rankin_average(table: CoefficientTable, x: float) -> float:
    n = int(math.floor(x))
    if n < 1 or n > table.n_max:
        raise IndexError(f"x={x} outside the table range 1..{table.n_max}")
    return math.fsum(table.values[:n] ** 2) / x
