"""Hierarchical psi-mu codebooks over scale-changeable RHS apertures.

Codebook sizes are counted in half-wavelength aperture units: a codebook of
size ``N`` spans ``N * lambda / 2``.  The physical lattice is denser (see
:func:`codebook_array`) because a sub-wavelength pitch keeps the holographic
reference-wave harmonics out of visible space.  Layer ``s`` of ``S`` uses a
centered window of ``n_phys / 2**(S - s)`` active elements.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .channels import LinearArray, NearFieldUser, psi_mu_channel, spherical_channel
from .sensing.radar import optimize_amplitudes
from .surface import HolographicPattern, Quantization

DEFAULT_PITCH = 1.0 / 6.0  # in wavelengths


def equivalent_arrays(N: int, active: int):
    """All contiguous ``active``-element windows of an ``N``-element array."""
    if not 1 <= active <= N:
        raise ValueError(f"need 1 <= active <= N, got active={active}, N={N}")
    out = []
    for start in range(N - active + 1):
        m = np.zeros(N, dtype=bool)
        m[start : start + active] = True
        out.append(m)
    return out


def codebook_array(N, lambda0=1.0, pitch=DEFAULT_PITCH, n_g=1.732, feed="center"):
    """Linear RHS spanning ``N`` half-wavelength units at a ``pitch * lambda0`` spacing."""
    per_unit = int(round(0.5 / pitch))
    if per_unit < 1 or abs(per_unit * pitch - 0.5) > 1e-9:
        raise ValueError("pitch must divide half a wavelength")
    geom = LinearArray(N * per_unit, lambda0, pitch * lambda0, n_g)
    if feed == "end":
        geom = LinearArray(geom.n, lambda0, geom.spacing, n_g, feed=float(geom.offsets[0]))
    elif feed != "center":
        raise ValueError("feed must be 'center' or 'end'")
    return geom


@dataclass(frozen=True, eq=False)
class Codeword:
    mask: np.ndarray
    pattern: HolographicPattern
    psi_interval: tuple
    mu_interval: tuple
    psi: float
    mu: float
    layer: int  # 1..S for the upper layers, S + 1 for the bottom layer
    cell: int
    mu_index: int = -1
    weights: np.ndarray | None = field(default=None, repr=False)

    def excitation(self, reference):
        """Unit-power element excitation ``m * q / ||m * q||``."""
        if self.weights is None:
            x = self.pattern.flat * reference
            nx = np.linalg.norm(x)
            object.__setattr__(self, "weights", x / nx if nx > 0 else x)
        return self.weights


@dataclass(frozen=True, eq=False)
class HierarchicalCodebook:
    geom: LinearArray
    S: int
    T: int
    r_min: float
    upper_layers: list
    bottom_layer: list
    mu_samples: np.ndarray
    reference: np.ndarray = field(repr=False)

    @property
    def n_codewords(self):
        return sum(len(l) for l in self.upper_layers) + sum(len(c) for c in self.bottom_layer)

    def layer(self, s):
        return self.upper_layers[s - 1]

    def codewords(self):
        for layer in self.upper_layers:
            yield from layer
        for cell in self.bottom_layer:
            yield from cell


def psi_cells(s):
    edges = np.linspace(-1.0, 1.0, 2**s + 1)
    return [(float(edges[i]), float(edges[i + 1])) for i in range(2**s)]


def mu_grid(T, r_min):
    """``T`` samples uniform in mu over ``[0, 1/r_min]`` and their coverage intervals."""
    top = 1.0 / r_min
    samples = np.array([top / 2]) if T == 1 else np.linspace(0.0, top, T)
    mids = np.concatenate([[0.0], (samples[1:] + samples[:-1]) / 2, [top]])
    return samples, [(float(mids[i]), float(mids[i + 1])) for i in range(T)]


def _design(geom, reference, psi, mu, mask, design, quant):
    target = psi_mu_channel(geom, psi, mu)
    if design == "matched":
        m = np.zeros(geom.n)
        m[mask] = optimize_amplitudes(target[mask], reference[mask]).amplitudes
        peak = m.max()
        m = m / peak if peak > 0 else m
    elif design == "holographic":
        m = (np.real(np.conj(target) * np.conj(reference)) + 1) / 2
    else:
        raise ValueError(f"unknown codeword design {design!r}")
    return HolographicPattern.build(np.where(mask, m, 0.0), quant, mask)


def build_codebook(geom_1d: LinearArray, S: int, T: int, r_min: float, design="matched", quant=None):
    """Binary-descent upper layers over psi plus a (psi, mu) bottom layer.

    Upper codewords focus at the cell center in psi with ``mu = 0``; the
    bottom layer uses the full aperture and focuses at each ``(psi, mu)``
    sample through the second-order phase model.  ``design='matched'``
    chooses the best amplitude-only weights for that focus, while
    ``'holographic'`` uses the interference pattern directly.
    """
    N = geom_1d.n
    if S < 1 or N < 2**S:
        raise ValueError(f"need S >= 1 and N >= 2**S (N={N}, S={S})")
    if T < 1 or r_min <= 0:
        raise ValueError("need T >= 1 and r_min > 0")
    quant = quant or Quantization()
    ref = geom_1d.reference_phase()
    mu_s, mu_iv = mu_grid(T, r_min)
    upper = []
    for s in range(1, S + 1):
        active = N // 2 ** (S - s)
        mask = equivalent_arrays(N, active)[(N - active) // 2]
        layer = []
        for i, (lo, hi) in enumerate(psi_cells(s)):
            pc = (lo + hi) / 2
            pat = _design(geom_1d, ref, pc, 0.0, mask, design, quant)
            layer.append(Codeword(mask, pat, (lo, hi), (0.0, 1.0 / r_min), pc, 0.0, s, i))
        upper.append(layer)
    full = np.ones(N, dtype=bool)
    bottom = []
    for i, (lo, hi) in enumerate(psi_cells(S)):
        pc = (lo + hi) / 2
        bottom.append(
            [
                Codeword(full, _design(geom_1d, ref, pc, float(mu), full, design, quant), (lo, hi), mu_iv[t], pc, float(mu), S + 1, i, t)
                for t, mu in enumerate(mu_s)
            ]
        )
    return HierarchicalCodebook(geom_1d, S, T, float(r_min), upper, bottom, mu_s, ref)


def codeword_gain(codebook, codeword, h):
    """Complex gain of a codeword on channel ``h`` at unit radiated power."""
    return complex(h @ codeword.excitation(codebook.reference))


class ChannelOracle:
    """Received power per codeword: ``|sqrt(snr) g + n|^2`` with ``n ~ CN(0, 1)``.

    ``snr_db=None`` is the noiseless oracle returning ``|g|^2``.
    """

    def __init__(self, codebook, h, snr_db=None, rng=None):
        self.codebook = codebook
        self.h = np.asarray(h, dtype=complex)
        self.snr_db = snr_db
        self.rng = rng
        if snr_db is not None and rng is None:
            raise ValueError("a noisy oracle needs a seeded generator")
        self.queries = 0

    def gain(self, cw):
        return codeword_gain(self.codebook, cw, self.h)

    def _noisy(self, g):
        if self.snr_db is None:
            return np.abs(g) ** 2
        snr = 10 ** (self.snr_db / 10)
        n = (self.rng.standard_normal(np.shape(g)) + 1j * self.rng.standard_normal(np.shape(g))) / np.sqrt(2)
        return np.abs(np.sqrt(snr) * g + n) ** 2

    def __call__(self, cw):
        self.queries += 1
        return float(self._noisy(self.gain(cw)))

    def measure_all(self, codewords):
        """Vectorized measurement of many codewords, in order."""
        X = np.stack([cw.excitation(self.codebook.reference) for cw in codewords])
        self.queries += len(codewords)
        return self._noisy(X @ self.h)


class TrainingResult(NamedTuple):
    psi: float
    mu: float
    query_count: int
    trace: list
    codeword: Codeword


def beam_train(codebook: HierarchicalCodebook, channel_oracle: Callable, snr_db=None) -> TrainingResult:
    """Binary descent over the upper layers, then a scan of the surviving cell's mu samples.

    ``snr_db`` is recorded in the trace only; the oracle owns the noise.
    """
    trace = []
    cell = 0
    for s in range(1, codebook.S + 1):
        layer = codebook.layer(s)
        kids = (0, 1) if s == 1 else (2 * cell, 2 * cell + 1)
        powers = [channel_oracle(layer[k]) for k in kids]
        cell = kids[int(np.argmax(powers))]
        trace.append({"layer": s, "candidates": kids, "powers": powers, "chosen": cell})
    powers = [channel_oracle(cw) for cw in codebook.bottom_layer[cell]]
    t = int(np.argmax(powers))
    trace.append({"layer": codebook.S + 1, "cell": cell, "powers": powers, "chosen": t, "snr_db": snr_db})
    cw = codebook.bottom_layer[cell][t]
    return TrainingResult(cw.psi, cw.mu, 2 * codebook.S + codebook.T, trace, cw)


def exhaustive_search(codebook, channel_oracle):
    """Scan every bottom-layer codeword."""
    cws = [cw for cell in codebook.bottom_layer for cw in cell]
    if hasattr(channel_oracle, "measure_all"):
        powers = channel_oracle.measure_all(cws)
    else:
        powers = [channel_oracle(cw) for cw in cws]
    best = cws[int(np.argmax(powers))]
    return TrainingResult(best.psi, best.mu, len(cws), [], best)


def random_user_channel(geom, rng, r_min, approx=False):
    """Channel of a user uniform in psi with ``mu`` uniform in ``[0, (1 - psi^2)/r_min]``."""
    psi = rng.uniform(-1.0, 1.0)
    mu = rng.uniform(0.0, (1 - psi * psi) / r_min)
    if approx or mu <= 0:
        return psi_mu_channel(geom, psi, mu), psi, mu
    user = NearFieldUser((1 - psi * psi) / mu, float(np.arccos(psi)))
    h = spherical_channel(geom, user) * np.exp(1j * geom.k0 * user.r)
    return h, psi, mu


def training_overhead_sweep(N_list, T, trials, snr_db, rng_for, r_min=20.0, lambda0=1.0):
    """Mean query counts and post-training rate of hierarchical vs exhaustive search.

    ``rng_for(N, trial)`` returns the generator for one trial, so the sweep is
    reproducible cell by cell.  Rates are ``log2(1 + snr |g|^2)`` on the
    selected codeword, with ``g`` the gain at unit radiated power; the
    reference is the noiseless exhaustive best.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    snr = 10 ** (snr_db / 10)
    cols = {k: [] for k in ("N", "hierarchical_queries", "exhaustive_queries", "rate_ratio", "rate_hierarchical", "rate_exhaustive")}
    for N in N_list:
        S = int(round(np.log2(N)))
        if 2**S != N:
            raise ValueError("codebook sizes must be powers of two")
        cb = build_codebook(codebook_array(N, lambda0), S, T, r_min * lambda0)
        hq, eq, rh, re = [], [], [], []
        for trial in range(trials):
            rng = rng_for(N, trial)
            h, _, _ = random_user_channel(cb.geom, rng, r_min * lambda0)
            noisy = ChannelOracle(cb, h, snr_db, rng)
            res = beam_train(cb, noisy, snr_db)
            ex = exhaustive_search(cb, ChannelOracle(cb, h))
            hq.append(res.query_count)
            eq.append(2**S * T)
            rh.append(np.log2(1 + snr * abs(codeword_gain(cb, res.codeword, h)) ** 2))
            re.append(np.log2(1 + snr * abs(codeword_gain(cb, ex.codeword, h)) ** 2))
        cols["N"].append(N)
        cols["hierarchical_queries"].append(np.mean(hq))
        cols["exhaustive_queries"].append(np.mean(eq))
        cols["rate_hierarchical"].append(np.mean(rh))
        cols["rate_exhaustive"].append(np.mean(re))
        cols["rate_ratio"].append(np.mean(rh) / np.mean(re))
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}


def beamwidth_3db(codebook, codeword, psi_grid=None):
    """Measured 3 dB width in psi of a codeword's far-field response."""
    psi = np.linspace(-1, 1, 8001) if psi_grid is None else psi_grid
    x = codeword.pattern.flat * codebook.reference
    A = np.exp(-1j * codebook.geom.k0 * np.outer(-psi, codebook.geom.offsets))
    p = np.abs(A @ x) ** 2
    j = int(np.argmax(p))
    half = p[j] / 2
    lo = j
    while lo > 0 and p[lo] >= half:
        lo -= 1
    hi = j
    while hi < p.size - 1 and p[hi] >= half:
        hi += 1
    return float(psi[hi] - psi[lo])


def _rle(mask):
    runs, cur, n = [], bool(mask[0]), 0
    for v in mask:
        if bool(v) == cur:
            n += 1
        else:
            runs.append(f"{n}:{int(cur)}")
            cur, n = bool(v), 1
    runs.append(f"{n}:{int(cur)}")
    return ",".join(runs)


def _unrle(s):
    out = []
    for run in s.split(","):
        n, v = run.split(":")
        out += [bool(int(v))] * int(n)
    return np.array(out, dtype=bool)


CODEBOOK_COLUMNS = ["layer", "cell", "mu_index", "psi", "mu", "psi_lo", "psi_hi", "mu_lo", "mu_hi", "mask_rle", "pattern"]


def save_codebook_csv(path, cb: HierarchicalCodebook):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["# S", cb.S, "T", cb.T, "r_min", repr(cb.r_min)])
        w.writerow(CODEBOOK_COLUMNS)
        for cw in cb.codewords():
            w.writerow(
                [cw.layer, cw.cell, cw.mu_index, repr(cw.psi), repr(cw.mu)]
                + [repr(v) for v in (*cw.psi_interval, *cw.mu_interval)]
                + [_rle(cw.mask), ";".join(repr(float(v)) for v in cw.pattern.flat)]
            )


def load_codebook_csv(path, geom_1d: LinearArray, quant=None) -> HierarchicalCodebook:
    quant = quant or Quantization()
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head = rows[0]
    S, T, r_min = int(head[1]), int(head[3]), float(head[5])
    upper = [[] for _ in range(S)]
    bottom = [[None] * T for _ in range(2**S)]
    for r in rows[2:]:
        layer, cell, t = int(r[0]), int(r[1]), int(r[2])
        mask = _unrle(r[9])
        pat = HolographicPattern(np.array([float(v) for v in r[10].split(";")]), quant, mask)
        cw = Codeword(mask, pat, (float(r[5]), float(r[6])), (float(r[7]), float(r[8])), float(r[3]), float(r[4]), layer, cell, t)
        if layer <= S:
            upper[layer - 1].append(cw)
        else:
            bottom[cell][t] = cw
    mu_s = np.array([cw.mu for cw in bottom[0]])
    return HierarchicalCodebook(geom_1d, S, T, r_min, upper, bottom, mu_s, geom_1d.reference_phase())
