"""Physical parameter types for spin-cavity nodes.

All rates and frequencies are dimensionless, measured in units of a global
reference linewidth (the decay rate of transition 0 of node A). Times are in
units of its inverse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import NonPhysicalParameter


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NonPhysicalParameter(name, "must be finite")
    return value


@dataclass(frozen=True)
class TransitionParams:
    """One optical transition coupled to the cavity.

    Attributes:
        g: Coupling strength to the cavity mode.
        gamma: Spontaneous decay rate of the excited state.
        delta: Detuning of the transition from the cavity resonance.
    """

    g: float
    gamma: float
    delta: float = 0.0

    def __post_init__(self):
        g = _finite("g", self.g)
        gamma = _finite("gamma", self.gamma)
        delta = _finite("delta", self.delta)
        if g < 0:
            raise NonPhysicalParameter("g", f"must be >= 0, got {g}")
        if gamma <= 0:
            raise NonPhysicalParameter("gamma", f"must be > 0, got {gamma}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "delta", delta)


@dataclass(frozen=True)
class NodeParams:
    """A single spin-cavity node with two qubit-conditioned transitions.

    Transition k is the one driven when the qubit is in state k. A
    three-level node has ``transitions[1].g == 0``.

    Attributes:
        kappa1: Decay rate through the front (coupling) mirror.
        kappa2: Decay rate through all other loss channels.
        transitions: Exactly two transitions, index 0 and 1.
    """

    kappa1: float
    kappa2: float
    transitions: tuple[TransitionParams, TransitionParams]

    def __post_init__(self):
        kappa1 = _finite("kappa1", self.kappa1)
        kappa2 = _finite("kappa2", self.kappa2)
        if kappa1 <= 0:
            raise NonPhysicalParameter("kappa1", f"must be > 0, got {kappa1}")
        if kappa2 < 0:
            raise NonPhysicalParameter("kappa2", f"must be >= 0, got {kappa2}")
        trans = tuple(self.transitions)
        if len(trans) != 2 or not all(isinstance(t, TransitionParams) for t in trans):
            raise NonPhysicalParameter("transitions", "need exactly two TransitionParams")
        object.__setattr__(self, "kappa1", kappa1)
        object.__setattr__(self, "kappa2", kappa2)
        object.__setattr__(self, "transitions", trans)

    @property
    def kappa(self) -> float:
        """Total cavity decay rate."""
        return self.kappa1 + self.kappa2

    @property
    def coupling_ratio(self) -> float:
        """Front-mirror fraction kappa1/kappa."""
        return self.kappa1 / self.kappa

    def cooperativity(self, k: int) -> float:
        """Cooperativity 4 g_k^2 / (kappa gamma_k) of transition k."""
        t = self.transitions[k]
        return 4.0 * t.g**2 / (self.kappa * t.gamma)

    @property
    def cooperativities(self) -> tuple[float, float]:
        return (self.cooperativity(0), self.cooperativity(1))

    @property
    def is_three_level(self) -> bool:
        return self.transitions[1].g == 0.0

    @classmethod
    def three_level(
        cls,
        C: float,
        kappa: float,
        kappa1_ratio: float = 1.0,
        gamma: float = 1.0,
        delta: float = 0.0,
    ) -> "NodeParams":
        """Build a node where only transition 0 couples to the cavity.

        Args:
            C: Cooperativity of transition 0.
            kappa: Total cavity decay rate.
            kappa1_ratio: kappa1/kappa.
            gamma: Decay rate of transition 0.
            delta: Transition-cavity detuning.
        """
        C = _finite("C", C)
        if C < 0:
            raise NonPhysicalParameter("C", f"must be >= 0, got {C}")
        if not kappa > 0:
            raise NonPhysicalParameter("kappa", f"must be > 0, got {kappa}")
        if not 0 < kappa1_ratio <= 1:
            raise NonPhysicalParameter("kappa1_ratio", f"must lie in (0, 1], got {kappa1_ratio}")
        g = math.sqrt(C * kappa * gamma / 4.0)
        kappa1 = kappa1_ratio * kappa
        return cls(
            kappa1=kappa1,
            kappa2=max(kappa - kappa1, 0.0),
            transitions=(TransitionParams(g, gamma, delta), TransitionParams(0.0, gamma, delta)),
        )

    def with_delta(self, delta0: float, delta1: float | None = None) -> "NodeParams":
        """Copy with new transition detunings (delta1 defaults to delta0)."""
        d1 = delta0 if delta1 is None else delta1
        t0, t1 = self.transitions
        return replace(self, transitions=(replace(t0, delta=delta0), replace(t1, delta=d1)))


def validate_node(params: NodeParams) -> NodeParams:
    """Re-check every invariant of a node and return it unchanged.

    Raises:
        NonPhysicalParameter: Naming the first offending field.
    """
    if not isinstance(params, NodeParams):
        raise NonPhysicalParameter("params", f"expected NodeParams, got {type(params).__name__}")
    if not params.kappa1 > 0:
        raise NonPhysicalParameter("kappa1", f"must be > 0, got {params.kappa1}")
    if not params.kappa2 >= 0:
        raise NonPhysicalParameter("kappa2", f"must be >= 0, got {params.kappa2}")
    for t in params.transitions:
        if not t.gamma > 0:
            raise NonPhysicalParameter("gamma", f"must be > 0, got {t.gamma}")
        if not t.g >= 0:
            raise NonPhysicalParameter("g", f"must be >= 0, got {t.g}")
    return params


@dataclass(frozen=True)
class FourLevelConfig:
    """Node with two cavity-coupled transitions split by ``zeta``.

    Both transitions share the coupling and decay rate of ``base``'s
    transition 0; their detunings are ``delta -/+ zeta/2``.

    Attributes:
        base: Template node; kappa1, kappa2 and transition 0's g, gamma are used.
        zeta: Splitting between the two transitions.
        delta: Common detuning of the transition pair from the cavity.
    """

    base: NodeParams
    zeta: float
    delta: float = 0.0

    def __post_init__(self):
        if not _finite("zeta", self.zeta) >= 0:
            raise NonPhysicalParameter("zeta", f"must be >= 0, got {self.zeta}")
        _finite("delta", self.delta)

    @classmethod
    def from_cooperativity(
        cls,
        C: float,
        kappa: float,
        zeta: float,
        delta: float = 0.0,
        kappa1_ratio: float = 1.0,
        gamma: float = 1.0,
    ) -> "FourLevelConfig":
        return cls(NodeParams.three_level(C, kappa, kappa1_ratio, gamma), zeta, delta)

    @property
    def cooperativity(self) -> float:
        return self.base.cooperativity(0)

    def with_(self, **changes) -> "FourLevelConfig":
        """Copy with ``delta``, ``zeta`` or ``kappa1_ratio`` replaced."""
        ratio = changes.pop("kappa1_ratio", None)
        cfg = replace(self, **changes)
        if ratio is not None:
            kappa = cfg.base.kappa
            base = replace(cfg.base, kappa1=ratio * kappa, kappa2=max(kappa - ratio * kappa, 0.0))
            cfg = replace(cfg, base=base)
        return cfg


def expand_four_level(cfg: FourLevelConfig) -> NodeParams:
    """Expand a four-level configuration into explicit node parameters."""
    t = cfg.base.transitions[0]
    return NodeParams(
        kappa1=cfg.base.kappa1,
        kappa2=cfg.base.kappa2,
        transitions=(
            TransitionParams(t.g, t.gamma, cfg.delta - cfg.zeta / 2.0),
            TransitionParams(t.g, t.gamma, cfg.delta + cfg.zeta / 2.0),
        ),
    )


@dataclass(frozen=True)
class NodeDeviation:
    """Additive offsets of node B from a three-level reference node.

    Attributes:
        eps_C: Cooperativity offset.
        eps_kappa: Total cavity decay offset.
        eps_kappa1: Front-mirror rate offset.
        eps_gamma: Transition decay offset.
        delta_A: Static transition detuning of node A.
        delta_B: Static transition detuning of node B.
    """

    eps_C: float = 0.0
    eps_kappa: float = 0.0
    eps_kappa1: float = 0.0
    eps_gamma: float = 0.0
    delta_A: float = 0.0
    delta_B: float = 0.0

    def scaled(self, s: float) -> "NodeDeviation":
        """All offsets multiplied by ``s``."""
        return NodeDeviation(*(s * getattr(self, f) for f in self.__dataclass_fields__))


def deviated_pair(
    C: float, kappa: float, kappa1: float, gamma: float, dev: NodeDeviation
) -> tuple[NodeParams, NodeParams]:
    """Three-level nodes A (reference) and B (reference plus offsets).

    The coupling g of node B is re-derived from its deviated C, kappa and
    gamma.

    Raises:
        NonPhysicalParameter: If node B leaves the physical domain.
    """

    def node(C_, kappa_, kappa1_, gamma_, delta_):
        if C_ < 0:
            raise NonPhysicalParameter("C", f"deviated cooperativity {C_} < 0")
        if kappa1_ <= 0:
            raise NonPhysicalParameter("kappa1", f"deviated kappa1 {kappa1_} <= 0")
        if gamma_ <= 0:
            raise NonPhysicalParameter("gamma", f"deviated gamma {gamma_} <= 0")
        if kappa1_ > kappa_:
            raise NonPhysicalParameter("kappa2", f"deviated kappa1 {kappa1_} exceeds kappa {kappa_}")
        return NodeParams.three_level(C_, kappa_, kappa1_ / kappa_, gamma_, delta_)

    a = node(C, kappa, kappa1, gamma, dev.delta_A)
    b = node(
        C + dev.eps_C,
        kappa + dev.eps_kappa,
        kappa1 + dev.eps_kappa1,
        gamma + dev.eps_gamma,
        dev.delta_B,
    )
    return a, b


@dataclass(frozen=True)
class SetupParams:
    """Interferometer setup.

    Attributes:
        eta: Photon transmittivity from source to detector.
        phi: Phase error between the two interferometer arms (radians).
    """

    eta: float = 1.0
    phi: float = 0.0

    def __post_init__(self):
        if not 0 < _finite("eta", self.eta) <= 1:
            raise NonPhysicalParameter("eta", f"must lie in (0, 1], got {self.eta}")
        _finite("phi", self.phi)


def random_node(rng, four_level: bool = False) -> NodeParams:
    """Draw node parameters from the ranges used by the randomized checks.

    C in [0.5, 5], kappa in [2, 20], kappa1/kappa in [0.55, 1], gamma = 1,
    delta in [-2, 2]; four-level nodes also draw zeta in [1, 6].

    Args:
        rng: ``numpy.random.Generator``.
        four_level: Draw a four-level node instead of a three-level one.
    """
    C = rng.uniform(0.5, 5.0)
    kappa = rng.uniform(2.0, 20.0)
    ratio = rng.uniform(0.55, 1.0)
    delta = rng.uniform(-2.0, 2.0)
    if four_level:
        return expand_four_level(FourLevelConfig.from_cooperativity(C, kappa, rng.uniform(1.0, 6.0), delta, ratio))
    return NodeParams.three_level(C, kappa, ratio, 1.0, delta)
