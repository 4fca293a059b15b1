"""Sybil wallet-splitting attacks and their amplification arithmetic.

A splitter divides one balance across n wallets and votes with all of them.
Token voting is split-invariant; quadratic voting hands a uniform splitter
roughly sqrt(n) times the honest influence, which is the attack these tools
quantify.  Amplification is the exact ratio attack_power / honest_power
rounded half-even at nine fractional digits, and is undefined (None) when
the honest power is zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from math import isqrt

from .core import NANO, GovlabError, TokenAmount, VotingPower, ratio_half_even
from .mechanisms import (
    ConvictionParams,
    ConvictionState,
    Mechanism,
    conviction_power,
    power_quadratic,
    power_token,
)


class SplitError(GovlabError):
    """Infeasible wallet split."""


@dataclass(frozen=True, slots=True)
class SplitStrategy:
    """Uniform split of one balance across n_wallets wallets."""

    total: TokenAmount
    n_wallets: int

    def balances(self) -> list[TokenAmount]:
        return split_uniform(self.total, self.n_wallets)


@dataclass(frozen=True, slots=True)
class SybilReport:
    honest_power: VotingPower
    attack_power: VotingPower
    amplification: Decimal | None  # None when honest power is zero (undefined)


def split_uniform(total: TokenAmount, n: int) -> list[TokenAmount]:
    """Split into n balances of floor(total/n) each, remainder to the first wallet."""
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SplitError(f"wallet count must be a positive int: {n!r}")
    if total.is_zero():
        raise SplitError("cannot split a zero balance")
    if total.units < n:
        raise SplitError(
            f"cannot split {total} into {n} wallets of at least one 1e-9 unit each"
        )
    q, r = divmod(total.units, n)
    balances = [TokenAmount.from_units(q) for _ in range(n - 1)]
    balances.insert(0, TokenAmount.from_units(q + r))
    return balances


def _power_of(
    amount: TokenAmount,
    mechanism: Mechanism,
    conviction: ConvictionParams | None,
    held_for: int,
) -> VotingPower:
    if mechanism is Mechanism.QUADRATIC:
        return power_quadratic(amount)
    if mechanism is Mechanism.CONVICTION:
        if conviction is None:
            raise SplitError("conviction mechanism requires ConvictionParams")
        state = ConvictionState(wallet="sybil-probe", option="probe", tokens=amount, held_since=0)
        return conviction_power(state, held_for, conviction)
    return power_token(amount)


def sybil_gain(
    total: TokenAmount,
    n: int,
    mechanism: "str | Mechanism",
    *,
    conviction: ConvictionParams | None = None,
    held_for: int = 0,
) -> SybilReport:
    """Honest power of one wallet vs. attack power of a uniform n-way split.

    All split wallets share the honest wallet's held_since, so under
    conviction every balance accrues for the same held_for ticks.
    """
    mechanism = Mechanism.parse(mechanism)
    if mechanism is Mechanism.CONVICTION and held_for < 0:
        raise SplitError("held_for must be a non-negative tick span")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SplitError(f"wallet count must be a positive int: {n!r}")
    if total.is_zero():
        raise SplitError("cannot split a zero balance")
    if total.units < n:
        raise SplitError(
            f"cannot split {total} into {n} wallets of at least one 1e-9 unit each"
        )
    honest = _power_of(total, mechanism, conviction, held_for)
    q, r = divmod(total.units, n)
    # A uniform split has only two distinct balances (q+r once, q repeated),
    # so the exact per-wallet power sum needs just two evaluations.
    first = _power_of(TokenAmount.from_units(q + r), mechanism, conviction, held_for)
    rest = _power_of(TokenAmount.from_units(q), mechanism, conviction, held_for) if n > 1 else None
    attack_units = first.units + (rest.units * (n - 1) if rest is not None else 0)
    attack = VotingPower.from_units(attack_units)
    amplification = None if honest.is_zero() else ratio_half_even(attack.units, honest.units)
    return SybilReport(honest_power=honest, attack_power=attack, amplification=amplification)


def best_split(
    total: TokenAmount,
    mechanism: "str | Mechanism",
    max_wallets: int,
    *,
    conviction: ConvictionParams | None = None,
    held_for: int = 0,
) -> tuple[int, SybilReport]:
    """Exhaustively scan n in [1, max_wallets] for the attack-power maximum.

    Ties break toward fewer wallets.  Splits finer than one 10^-9 unit per
    wallet are infeasible, so the scan stops at total's unit count.
    """
    if not isinstance(max_wallets, int) or isinstance(max_wallets, bool) or max_wallets < 1:
        raise SplitError(f"max_wallets must be a positive int: {max_wallets!r}")
    mechanism = Mechanism.parse(mechanism)
    feasible_max = min(max_wallets, total.units)
    if feasible_max < 1:
        raise SplitError("cannot split a zero balance")
    best_n = 0
    best_units = -1
    total_units = total.units
    if mechanism is Mechanism.QUADRATIC:
        # Tight integer loop: the generic path allocates two value objects per
        # n, which matters when the scan covers millions of wallet counts.
        last_q = -1
        rest_units = 0
        for n in range(1, feasible_max + 1):
            q, r = divmod(total_units, n)
            m = (q + r) * NANO
            s = isqrt(m)
            if s * s != m and m - s * s > s:
                s += 1
            if n > 1:
                if q != last_q:
                    m2 = q * NANO
                    s2 = isqrt(m2)
                    if s2 * s2 != m2 and m2 - s2 * s2 > s2:
                        s2 += 1
                    last_q, rest_units = q, s2
                attack_units = s + (n - 1) * rest_units
            else:
                attack_units = s
            if attack_units > best_units:
                best_units = attack_units
                best_n = n
    else:
        for n in range(1, feasible_max + 1):
            q, r = divmod(total_units, n)
            first = _power_of(TokenAmount.from_units(q + r), mechanism, conviction, held_for)
            if n > 1:
                rest = _power_of(TokenAmount.from_units(q), mechanism, conviction, held_for)
                attack_units = first.units + rest.units * (n - 1)
            else:
                attack_units = first.units
            if attack_units > best_units:
                best_units = attack_units
                best_n = n
    return best_n, sybil_gain(total, best_n, mechanism, conviction=conviction, held_for=held_for)
