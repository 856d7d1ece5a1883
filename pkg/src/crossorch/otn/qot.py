"""GSNR estimation with a per-span incoherent GN model.

Every span is followed by an amplifier whose gain restores the launch power:
span loss plus the insertion loss of the node the span terminates on (zero
for spans inside a link). The channel therefore enters each span at the same
power ``P``, and each span contributes

* ASE:  h * nu * (NF * G - 1) * B_ref
* NLI:  eta * P**3 * B_ref

with ``eta`` the closed-form single-channel GN coefficient (a PSD per W^3).
Both terms are referred to the reference bandwidth so that the returned
value is comparable to a 0.1 nm OSNR. Span contributions add incoherently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..errors import InvalidPath
from .paths import PathCandidate, path_links, with_gsnr
from .topology import ChannelParams, Span, Topology

PLANCK = 6.62607015e-34  # J s
_DB_PER_NEPER = 20.0 / math.log(10.0)  # field attenuation: dB/km -> 1/km


def db2lin(db: float) -> float:
    return 10.0 ** (db / 10.0)


def lin2db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm2watt(dbm: float) -> float:
    return 1e-3 * db2lin(dbm)


@dataclass(frozen=True)
class AmplifiedSpan:
    """A span together with the gain of the amplifier that follows it."""

    span: Span
    gain_db: float

    @classmethod
    def compensating(cls, span: Span, extra_loss_db: float = 0.0) -> "AmplifiedSpan":
        return cls(span, span.loss_db + extra_loss_db)


def nli_coefficient(span: Span, symbol_rate_baud: float) -> float:
    """Closed-form GN NLI coefficient in W/Hz per W^3 of launch power."""
    gamma = span.gamma_per_w_km
    if gamma == 0.0:
        return 0.0
    alpha = span.alpha_db_per_km / _DB_PER_NEPER
    l_eff = (1.0 - math.exp(-2.0 * alpha * span.length_km)) / (2.0 * alpha)
    l_eff_a = 1.0 / (2.0 * alpha)
    beta2 = abs(span.beta2_ps2_per_km) * 1e-24  # s^2/km
    b = symbol_rate_baud
    prefactor = (8.0 / 27.0) * gamma ** 2 * l_eff ** 2
    if beta2 == 0.0:
        # asinh(x)/x -> 1
        return prefactor * (math.pi / 2.0) / b
    x = (math.pi ** 2 / 2.0) * beta2 * l_eff_a * b ** 2
    return prefactor * math.asinh(x) / (math.pi * beta2 * l_eff_a * b ** 3)


def ase_power(span: AmplifiedSpan, channel: ChannelParams) -> float:
    nf = db2lin(span.span.amp_nf_db)
    g = db2lin(span.gain_db)
    return PLANCK * channel.center_freq_hz * (nf * g - 1.0) * channel.ref_bandwidth_hz


def nli_power(span: AmplifiedSpan, channel: ChannelParams, power_w: float | None = None) -> float:
    p = dbm2watt(channel.launch_power_dbm) if power_w is None else power_w
    return nli_coefficient(span.span, channel.symbol_rate_baud) * p ** 3 * channel.ref_bandwidth_hz


def inverse_snr_terms(spans: Iterable[AmplifiedSpan], channel: ChannelParams) -> tuple[float, float]:
    """(sum of ASE/P, sum of NLI/P) over the spans."""
    spans = list(spans)
    p = dbm2watt(channel.launch_power_dbm)
    ase = math.fsum(ase_power(s, channel) / p for s in spans)
    nli = math.fsum(nli_power(s, channel, p) / p for s in spans)
    return ase, nli


def gsnr_of_spans(spans: Sequence[AmplifiedSpan], channel: ChannelParams) -> float:
    """GSNR in dB of a cascade of amplified spans."""
    spans = list(spans)
    if not spans:
        raise InvalidPath("a path needs at least one span")
    ase, nli = inverse_snr_terms(spans, channel)
    return -lin2db(ase + nli)


def path_spans(topology: Topology, path: PathCandidate) -> list[AmplifiedSpan]:
    """Spans in traversal order; the last span of each hop also makes up the next node's loss."""
    out = []
    links = path_links(topology, path)
    for u, v, link in zip(path.nodes, path.nodes[1:], links):
        spans = link.spans if link.a == u else tuple(reversed(link.spans))
        node_loss = topology.node(v).insertion_loss_db
        for i, span in enumerate(spans):
            extra = node_loss if i == len(spans) - 1 else 0.0
            out.append(AmplifiedSpan.compensating(span, extra))
    return out


def estimate_gsnr(topology: Topology, path: PathCandidate | str) -> float:
    """GSNR in dB of ``path`` at the topology's channel settings."""
    return gsnr_of_spans(path_spans(topology, PathCandidate.parse(path)), topology.channel)


def evaluate_path(topology: Topology, path: PathCandidate | str) -> PathCandidate:
    """Return the candidate with its length and GSNR filled in."""
    cand = PathCandidate.parse(path)
    spans = path_spans(topology, cand)
    length = math.fsum(s.span.length_km for s in spans)
    return with_gsnr(cand, gsnr_of_spans(spans, topology.channel), length)


def optimal_launch_power_dbm(spans: Sequence[AmplifiedSpan], channel: ChannelParams) -> float:
    """Launch power maximising GSNR: ASE/P = 2 * NLI/P at the optimum.

    GSNR(P) = P / (A + C P^3) with A the summed ASE power and C the summed
    NLI coefficient, so dGSNR/dP = 0 at P^3 = A / (2 C).
    """
    a = math.fsum(ase_power(s, channel) for s in spans)
    c = math.fsum(nli_coefficient(s.span, channel.symbol_rate_baud) * channel.ref_bandwidth_hz
                  for s in spans)
    if c == 0.0:
        return math.inf
    return lin2db((a / (2.0 * c)) ** (1.0 / 3.0) / 1e-3)
