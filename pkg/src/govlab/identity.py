"""Identity verification and the one-person-one-vote vote filter.

An IdentityRegistry binds wallets to verified identities under one of two
modes.  StrictOneWallet admits at most one wallet per identity, so a
split-wallet attack keeps exactly one voting wallet.  CollapsePerIdentity
admits many wallets but the filter merges an identity's same-option votes
into a single record before tallying, so a concave power function (the
square root) applies once to the combined stake, which is precisely what
neutralizes quadratic-voting Sybil amplification.

An identity whose wallets vote for different options is equivocating: all
of its votes are excluded and reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from enum import Enum
from typing import Any, Iterable, Sequence

from .core import (
    GovlabError,
    IdentityId,
    TokenAmount,
    VoteRecord,
    WalletId,
    canonical_json,
    loads_canonical,
    parse_units,
    fmt_units,
)
from .mechanisms import ConvictionState
from .rng import Xoshiro256StarStar


class IdentityError(GovlabError):
    """Violated registry or filter precondition."""


class RegistryMode(str, Enum):
    STRICT_ONE_WALLET = "strict_one_wallet"
    COLLAPSE_PER_IDENTITY = "collapse_per_identity"


class VotePolicy(str, Enum):
    DROP_UNVERIFIED = "drop_unverified"
    ADMIT_UNVERIFIED = "admit_unverified"


class RejectionReason(str, Enum):
    DUPLICATE_IDENTITY = "DuplicateIdentity"
    WALLET_ALREADY_BOUND = "WalletAlreadyBound"
    PROVIDER_REJECTED = "ProviderRejected"


@dataclass(frozen=True, slots=True)
class VerificationOutcome:
    accepted: bool
    reason: RejectionReason | None = None

    @classmethod
    def ok(cls) -> "VerificationOutcome":
        return cls(accepted=True)

    @classmethod
    def rejected(cls, reason: RejectionReason) -> "VerificationOutcome":
        return cls(accepted=False, reason=reason)


class IdentityRegistry:
    """Mutable wallet-to-identity binding table; single writer."""

    def __init__(self, mode: "str | RegistryMode"):
        self.mode = RegistryMode(mode)
        self._wallets_by_identity: dict[IdentityId, list[WalletId]] = {}
        self._identity_by_wallet: dict[WalletId, IdentityId] = {}

    def bind(self, identity: IdentityId, wallet: WalletId) -> VerificationOutcome:
        """Attempt to bind a wallet to an identity under the registry's mode.

        Rebinding an existing (identity, wallet) pair is an accepted no-op.
        A wallet bound to a different identity is rejected WalletAlreadyBound;
        a second wallet under StrictOneWallet is rejected DuplicateIdentity.
        """
        identity = IdentityId(identity)
        wallet = WalletId(wallet)
        bound_to = self._identity_by_wallet.get(wallet)
        if bound_to is not None:
            if bound_to == identity:
                return VerificationOutcome.ok()
            return VerificationOutcome.rejected(RejectionReason.WALLET_ALREADY_BOUND)
        existing = self._wallets_by_identity.get(identity, [])
        if self.mode is RegistryMode.STRICT_ONE_WALLET and existing:
            return VerificationOutcome.rejected(RejectionReason.DUPLICATE_IDENTITY)
        self._wallets_by_identity.setdefault(identity, []).append(wallet)
        self._identity_by_wallet[wallet] = identity
        return VerificationOutcome.ok()

    def identity_of(self, wallet: WalletId) -> IdentityId | None:
        return self._identity_by_wallet.get(wallet)

    def wallets_of(self, identity: IdentityId) -> tuple[WalletId, ...]:
        return tuple(self._wallets_by_identity.get(IdentityId(identity), ()))

    def identities(self) -> tuple[IdentityId, ...]:
        return tuple(self._wallets_by_identity)

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "bindings": [
                {"identity": str(i), "wallets": sorted(str(w) for w in ws)}
                for i, ws in sorted(self._wallets_by_identity.items())
            ],
        }

    def to_json(self) -> str:
        return canonical_json(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: dict[str, Any]) -> "IdentityRegistry":
        registry = cls(RegistryMode(obj["mode"]))
        for binding in obj["bindings"]:
            identity = IdentityId(binding["identity"])
            for wallet in binding["wallets"]:
                outcome = registry.bind(identity, WalletId(wallet))
                if not outcome.accepted:
                    raise IdentityError(
                        f"binding {binding['identity']!r}/{wallet!r} violates "
                        f"{registry.mode.value}: {outcome.reason.value}"
                    )
        return registry

    @classmethod
    def from_json(cls, text: str) -> "IdentityRegistry":
        return cls.from_json_obj(loads_canonical(text))


@dataclass(frozen=True, slots=True)
class FilterReport:
    """Votes that survived the identity filter, plus what was excluded and why."""

    votes: tuple
    dropped_unverified: tuple[WalletId, ...] = ()
    equivocating_identities: tuple[IdentityId, ...] = ()


def _merge_group(group: list, mode: RegistryMode):
    if len(group) == 1:
        return group[0]
    if mode is not RegistryMode.COLLAPSE_PER_IDENTITY:
        raise IdentityError("multiple wallets per identity outside collapse mode")
    wallet = min(v.wallet for v in group)
    if isinstance(group[0], ConvictionState):
        total = sum(v.tokens.units for v in group)
        # Latest held_since wins: merged conviction cannot predate any member.
        return ConvictionState(
            wallet=wallet,
            option=group[0].option,
            tokens=TokenAmount.from_units(total),
            held_since=max(v.held_since for v in group),
        )
    total = sum(v.committed.units for v in group)
    return VoteRecord(
        wallet=wallet,
        proposal=group[0].proposal,
        option=group[0].option,
        committed=TokenAmount.from_units(total),
        cast_at=min(v.cast_at for v in group),
    )


def filter_and_collapse(
    votes: Sequence[VoteRecord | ConvictionState],
    registry: IdentityRegistry | None,
    policy: "str | VotePolicy",
) -> FilterReport:
    """Apply identity policy to a live vote set.

    Unverified wallets are dropped or admitted per policy (with no registry,
    every wallet is unverified).  Each identity's votes are grouped: mixed
    options mean equivocation and the identity loses all its votes; in
    collapse mode same-option votes merge into one record with the exact
    token sum.  The operation is idempotent.
    """
    policy = VotePolicy(policy)
    seen_wallets: set[WalletId] = set()
    groups: dict[IdentityId, list] = {}
    placed: list[tuple[str, Any]] = []  # ("vote", record) | ("identity", id), first occurrence order
    dropped: list[WalletId] = []

    for vote in votes:
        if vote.wallet in seen_wallets:
            raise IdentityError(f"wallet {vote.wallet!r} has more than one live vote")
        seen_wallets.add(vote.wallet)
        identity = registry.identity_of(vote.wallet) if registry is not None else None
        if identity is None:
            if policy is VotePolicy.ADMIT_UNVERIFIED:
                placed.append(("vote", vote))
            else:
                dropped.append(vote.wallet)
            continue
        if identity not in groups:
            groups[identity] = []
            placed.append(("identity", identity))
        groups[identity].append(vote)

    equivocating: list[IdentityId] = []
    kept: list = []
    for kind, value in placed:
        if kind == "vote":
            kept.append(value)
            continue
        group = groups[value]
        if len({v.option for v in group}) > 1:
            equivocating.append(value)
            continue
        kept.append(_merge_group(group, registry.mode))

    return FilterReport(
        votes=tuple(kept),
        dropped_unverified=tuple(dropped),
        equivocating_identities=tuple(equivocating),
    )


@dataclass(frozen=True, slots=True)
class IdentityClaim:
    """A claim that wallet belongs to identity; fraudulent claims are Sybil fakes."""

    identity: IdentityId
    wallet: WalletId
    fraudulent: bool = False


@dataclass(frozen=True, slots=True)
class ProviderParams:
    false_accept_rate: Decimal
    seed: int

    def __post_init__(self):
        units = parse_units(self.false_accept_rate)
        if units > 10**9:
            raise IdentityError(
                f"false_accept_rate must be in [0, 1]: {self.false_accept_rate}"
            )
        object.__setattr__(self, "false_accept_rate", Decimal(fmt_units(units)))
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise IdentityError(f"provider seed must be a u64: {self.seed!r}")


class SimulatedProvider:
    """Deterministic stand-in for an external identity-verification service.

    Genuine claims are always accepted and consume no randomness.  A
    fraudulent claim consumes one draw and is falsely accepted when the
    draw lands below false_accept_rate.
    """

    def __init__(self, params: ProviderParams):
        self.params = params
        self._rng = Xoshiro256StarStar.from_seed(params.seed)
        self._rate = float(params.false_accept_rate)

    def review(self, claim: IdentityClaim) -> bool:
        if not claim.fraudulent:
            return True
        return self._rng.next_float() < self._rate


def simulate_provider(claims: Iterable[IdentityClaim], params: ProviderParams) -> list[bool]:
    """Review a claim sequence with a fresh provider; same inputs, same verdicts."""
    provider = SimulatedProvider(params)
    return [provider.review(claim) for claim in claims]
