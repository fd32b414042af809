"""Two classic monitored systems with closed-form steady-state answers.

Example 1 is a trapped particle under continuous position monitoring
(harmonic potential, coupling through the position quadrature): kappa = 0,
the drift oscillates, and the steady error determinant has a closed form
for every detector phase. Example 2 is an on-threshold down-conversion
system monitored through a damped cavity (coupling q + i*p): kappa =
gamma^2 > 0 and the phase-0 steady variances are diagonal with a closed
form. Both serve as ground-truth oracles for the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SystemSpec

__all__ = [
    "PhaseSingularity",
    "Example1Params",
    "Example2Params",
    "example1_spec",
    "example1_det",
    "example1_product",
    "example2_spec",
    "example2_product",
]


class PhaseSingularity(ValueError):
    """The det closed form diverges at |cos phi| = 0 (pure phase quadrature)."""


@dataclass(frozen=True)
class Example1Params:
    """Monitored particle in a harmonic trap: H = (m w^2/2) q^2 + p^2/(2m),
    coupling sqrt(2*alpha) q."""

    m: float = 1.0
    omega: float = 1.0
    alpha: float = 0.5
    phi: float = 0.0
    eta: float = 1.0
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise ValueError("m must be positive")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def r1(self) -> float:
        """Trap-to-measurement strength ratio hbar*m*omega^2/(8*eta*alpha)."""
        return self.hbar * self.m * self.omega**2 / (8.0 * self.eta * self.alpha)


@dataclass(frozen=True)
class Example2Params:
    """Atomic system in a damped cavity with an on-threshold down-converter:
    H = (beta/2)(qp + pq), coupling gamma*(q + i p)."""

    beta: float = 1.0
    gamma: float = 1.0
    phi: float = 0.0
    eta: float = 1.0
    hbar: float = 1.0

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")

    @property
    def r2(self) -> float:
        """Squeezing-to-damping ratio beta/gamma^2."""
        return self.beta / self.gamma**2


def example1_spec(p: Example1Params) -> SystemSpec:
    """System spec for the trapped monitored particle (kappa = 0)."""
    G = np.diag([p.m * p.omega**2, 1.0 / p.m])
    C = np.sqrt(2.0 * p.alpha) * np.array([1.0, 0.0], dtype=complex)
    return SystemSpec(G=G, C=C, phi=p.phi, eta=p.eta, hbar=p.hbar)


def example1_det(p: Example1Params) -> float:
    """Closed-form det of the steady error covariance, any phase.

    det = (hbar^2/4eta) * ((1-eta)/cos^2(phi) + eta).

    Raises
    ------
    PhaseSingularity
        When |cos phi| < 1e-12 (the formula diverges; the measurement reads
        a pure phase quadrature and position information is lost).
    """
    c = np.cos(p.phi)
    if abs(c) < 1e-12:
        raise PhaseSingularity("det closed form diverges at cos(phi) = 0")
    q = p.hbar**2 / (4.0 * p.eta)
    return q * ((1.0 - p.eta) / (c * c) + p.eta)


def example1_product(p: Example1Params) -> float:
    """Closed-form steady variance product at phi = 0 (as printed).

    product = hbar^2/4eta + (hbar^2/4eta)/sqrt(r1^2 + r1 + hbar^2/4eta),
    with r1 = hbar*m*omega^2/(8*eta*alpha). Decreasing in r1 with limit
    hbar^2/4eta.
    """
    if p.phi != 0.0:
        raise ValueError("product closed form is only available at phi = 0")
    q = p.hbar**2 / (4.0 * p.eta)
    r1 = p.r1
    return q + q / np.sqrt(r1 * r1 + r1 + q)


def example2_spec(p: Example2Params) -> SystemSpec:
    """System spec for the monitored down-conversion system (kappa = gamma^2)."""
    G = np.array([[0.0, p.beta], [p.beta, 0.0]])
    C = p.gamma * np.array([1.0, 1.0j])
    return SystemSpec(G=G, C=C, phi=p.phi, eta=p.eta, hbar=p.hbar)


def example2_product(p: Example2Params) -> float:
    """Closed-form steady variance product at phi = 0.

    product = (hbar^2/8eta) * (sqrt(r2^2 + 2(2eta-1) r2 + 1) + r2 + 2eta - 1)
              / (1 + r2),
    with r2 = beta/gamma^2. Collapses to hbar^2/4 at eta = 1 and in the
    strong-coupling limit r2 -> 0.
    """
    if p.phi != 0.0:
        raise ValueError("product closed form is only available at phi = 0")
    r2 = p.r2
    two_eta_1 = 2.0 * p.eta - 1.0
    root = np.sqrt(r2 * r2 + 2.0 * two_eta_1 * r2 + 1.0)
    return (p.hbar**2 / (8.0 * p.eta)) * (root + r2 + two_eta_1) / (1.0 + r2)
