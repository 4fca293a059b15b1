"""Voting mechanisms: token-weighted, quorum-gated, quadratic, conviction.

Power functions:
  token / quorum  power = tokens committed (identity map)
  quadratic       power = sqrt(tokens), half-even at 9 fractional digits
  conviction      power = tokens * (1 - e^(-decay_rate * (now - held_since))),
                  half-even at 9 fractional digits

The square root is computed on integers (exact decision against the true
midpoint, so the half-even rule is honored without floating point); the
exponential is evaluated in 50-digit decimal context before the single
rounding.  A quorum gate may be attached to any mechanism: participation is
measured against total token supply or against the wallet universe, and a
tally meeting the threshold exactly passes.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, localcontext
from enum import Enum
from functools import lru_cache
from math import isqrt
from typing import Sequence

from .core import (
    GovlabError,
    NANO,
    TallyOutcome,
    TallyResult,
    TokenAmount,
    VoteRecord,
    VotingPower,
    WalletId,
    _check_option,
    fmt_units,
    parse_units,
    power_sum,
    round_half_even_units,
)


class MechanismError(GovlabError):
    """Violated precondition in a mechanism computation."""


class Mechanism(str, Enum):
    TOKEN = "token"
    QUORUM = "quorum"
    QUADRATIC = "quadratic"
    CONVICTION = "conviction"

    @classmethod
    def parse(cls, value: "str | Mechanism") -> "Mechanism":
        try:
            return cls(value)
        except ValueError:
            raise MechanismError(
                f"unknown mechanism {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None


class QuorumBasis(str, Enum):
    TOKEN_SUPPLY_FRACTION = "token_supply_fraction"
    WALLET_COUNT_FRACTION = "wallet_count_fraction"


@dataclass(frozen=True, slots=True)
class QuorumConfig:
    """Minimum-participation gate: basis plus a threshold fraction in [0, 1]."""

    basis: QuorumBasis
    threshold: Decimal

    def __post_init__(self):
        object.__setattr__(self, "basis", QuorumBasis(self.basis))
        units = parse_units(self.threshold)
        if units > NANO:
            raise MechanismError(f"quorum threshold must be in [0, 1]: {self.threshold}")
        object.__setattr__(self, "threshold", Decimal(fmt_units(units)))

    @property
    def threshold_units(self) -> int:
        return int(self.threshold.scaleb(9))

    def to_json_obj(self) -> dict:
        return {"basis": self.basis.value, "threshold": str(self.threshold)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "QuorumConfig":
        return cls(basis=QuorumBasis(obj["basis"]), threshold=Decimal(obj["threshold"]))


@dataclass(frozen=True, slots=True)
class ConvictionParams:
    """decay_rate is the alpha in 1 - e^(-alpha * dt); must be positive."""

    decay_rate: Decimal

    def __post_init__(self):
        units = parse_units(self.decay_rate)
        if units == 0:
            raise MechanismError("decay_rate must be positive")
        object.__setattr__(self, "decay_rate", Decimal(fmt_units(units)))

    def to_json_obj(self) -> dict:
        return {"decay_rate": str(self.decay_rate)}

    @classmethod
    def from_json_obj(cls, obj: dict) -> "ConvictionParams":
        return cls(decay_rate=Decimal(obj["decay_rate"]))


@dataclass(frozen=True, slots=True)
class ConvictionState:
    """A wallet's standing conviction commitment: tokens held on an option since a tick."""

    wallet: WalletId
    option: str
    tokens: TokenAmount
    held_since: int

    def __post_init__(self):
        object.__setattr__(self, "wallet", WalletId(self.wallet))
        _check_option(self.option)
        if not isinstance(self.tokens, TokenAmount):
            raise MechanismError("tokens must be a TokenAmount")
        if self.tokens.is_zero():
            raise MechanismError("conviction requires a positive token commitment")
        if not isinstance(self.held_since, int) or isinstance(self.held_since, bool) or self.held_since < 0:
            raise MechanismError("held_since must be a non-negative tick")


def power_token(committed: TokenAmount) -> VotingPower:
    """One token, one vote: power equals the committed amount exactly."""
    if committed.is_zero():
        raise MechanismError("token voting requires a positive commitment")
    return VotingPower.from_units(committed.units)


def power_quadratic(committed: TokenAmount) -> VotingPower:
    """power = sqrt(tokens), rounded half-even at nine fractional digits.

    With U the commitment in 10^-9 units, the result in units is the
    half-even rounding of sqrt(U * 10^9); the comparison against the true
    midpoint is exact in integers (a non-square has an irrational root, so a
    tie can only occur at a perfect square, where the root is exact).
    """
    n = committed.units * NANO
    s = isqrt(n)
    if s * s != n and n - s * s > s:
        s += 1
    return VotingPower.from_units(s)


@lru_cache(maxsize=4096)
def _decay_factor(decay_rate: Decimal, dt: int) -> Decimal:
    """1 - e^(-decay_rate * dt) to 50 significant digits."""
    with localcontext() as ctx:
        ctx.prec = 50
        return 1 - (-decay_rate * dt).exp()


def conviction_power(state: ConvictionState, now: int, params: ConvictionParams) -> VotingPower:
    """Conviction accrued by `now`: tokens * (1 - e^(-decay_rate * dt))."""
    if not isinstance(now, int) or isinstance(now, bool):
        raise MechanismError("now must be an integer tick")
    if now < state.held_since:
        raise MechanismError(
            f"now={now} precedes held_since={state.held_since}"
        )
    dt = now - state.held_since
    if dt == 0:
        return VotingPower.zero()
    with localcontext() as ctx:
        ctx.prec = 50
        raw = state.tokens.as_decimal() * _decay_factor(params.decay_rate, dt)
    return VotingPower.from_units(round_half_even_units(raw))


def switch_vote(state: ConvictionState, new_option: str, now: int) -> ConvictionState:
    """Move a conviction commitment to a different option; accrual restarts at now."""
    _check_option(new_option)
    if new_option == state.option:
        raise MechanismError("switch_vote to the same option is a caller bug")
    if now < state.held_since:
        raise MechanismError(f"now={now} precedes held_since={state.held_since}")
    return ConvictionState(wallet=state.wallet, option=new_option, tokens=state.tokens, held_since=now)


def _quorum_met(
    quorum: QuorumConfig,
    participating_units: int,
    voting_wallets: int,
    supply_units: int,
    wallet_universe_size: int,
) -> bool:
    t = quorum.threshold_units
    if quorum.basis is QuorumBasis.TOKEN_SUPPLY_FRACTION:
        # participating/supply >= t/NANO, cross-multiplied so the test is exact.
        return participating_units * NANO >= t * supply_units
    return voting_wallets * NANO >= t * wallet_universe_size


def tally(
    votes: Sequence[VoteRecord | ConvictionState],
    mechanism: "str | Mechanism",
    *,
    supply: TokenAmount,
    wallet_universe_size: int,
    quorum: QuorumConfig | None = None,
    now: int | None = None,
    conviction: ConvictionParams | None = None,
    options: Sequence[str] | None = None,
) -> TallyResult:
    """Aggregate live votes under a mechanism, gate on quorum, pick the outcome.

    The winner is the unique option with strictly maximal power; equal
    maximal powers yield a tie.  When `options` is given, every listed
    option appears in per_option_power (zero-vote options at zero power) and
    votes must stay inside that list.
    """
    mechanism = Mechanism.parse(mechanism)
    if not isinstance(wallet_universe_size, int) or wallet_universe_size < 0:
        raise MechanismError("wallet_universe_size must be a non-negative count")
    if mechanism is Mechanism.QUORUM and quorum is None:
        raise MechanismError("quorum mechanism requires a QuorumConfig")
    if mechanism is Mechanism.CONVICTION:
        if conviction is None:
            raise MechanismError("conviction mechanism requires ConvictionParams")
        if now is None:
            raise MechanismError("conviction tally requires the current tick")

    option_order: list[str] = list(options) if options is not None else []
    seen_options = set(option_order)
    if len(seen_options) != len(option_order):
        raise MechanismError("options must be distinct")

    wallets: set[WalletId] = set()
    proposals: set[str] = set()
    committed_units = 0
    per_option_units: dict[str, int] = {o: 0 for o in option_order}

    for vote in votes:
        if mechanism is Mechanism.CONVICTION:
            if not isinstance(vote, ConvictionState):
                raise MechanismError("conviction tally expects ConvictionState votes")
            tokens = vote.tokens
            power = conviction_power(vote, now, conviction)
        else:
            if not isinstance(vote, VoteRecord):
                raise MechanismError(f"{mechanism.value} tally expects VoteRecord votes")
            proposals.add(vote.proposal)
            if len(proposals) > 1:
                raise MechanismError("votes reference more than one proposal")
            tokens = vote.committed
            if mechanism is Mechanism.QUADRATIC:
                power = power_quadratic(tokens)
            else:
                power = power_token(tokens)
        if vote.wallet in wallets:
            raise MechanismError(f"wallet {vote.wallet!r} appears more than once")
        wallets.add(vote.wallet)
        if options is not None and vote.option not in seen_options:
            raise MechanismError(
                f"vote option {vote.option!r} is not among the tallied options"
            )
        if vote.option not in per_option_units:
            option_order.append(vote.option)
            per_option_units[vote.option] = 0
        committed_units += tokens.units
        per_option_units[vote.option] += power.units

    if committed_units > supply.units:
        raise MechanismError(
            f"committed total {fmt_units(committed_units)} exceeds supply {supply}"
        )

    per_option_power = {o: VotingPower.from_units(u) for o, u in per_option_units.items()}
    # power_sum re-checks the fixed-point range across all options.
    power_sum(per_option_power.values())
    participating = TokenAmount.from_units(committed_units)

    if quorum is not None and not _quorum_met(
        quorum, committed_units, len(wallets), supply.units, wallet_universe_size
    ):
        outcome = TallyOutcome.quorum_failed()
    elif not per_option_units:
        outcome = TallyOutcome.tie(())
    else:
        best = max(per_option_units.values())
        leaders = [o for o in option_order if per_option_units[o] == best]
        outcome = TallyOutcome.winner(leaders[0]) if len(leaders) == 1 else TallyOutcome.tie(leaders)

    return TallyResult(
        per_option_power=per_option_power,
        participating_tokens=participating,
        outcome=outcome,
    )
