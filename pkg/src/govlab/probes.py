"""Brute-force probes for two Arrow social-choice criteria.

These report on the actual mechanism by exhaustive enumeration of small
instances; they are diagnostics, not verifications.  dictator_probe flags
an agent whose top choice wins in *every* preference profile; iia_probe
hunts for a profile where deleting a non-winning option flips the winner
between the remaining options (an independence violation witness).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product
from typing import Any

from .core import GovlabError, TallyResult, VoteRecord
from .mechanisms import ConvictionState, Mechanism, tally
from .scenario import AgentKind, AgentSpec, Scenario
from .simulation import SimulationSetup, build_setup

MAX_PROBE_AGENTS = 4
MAX_PROBE_OPTIONS = 3


class InstanceTooLarge(GovlabError):
    """Enumeration bound exceeded; probes are exhaustive by design."""


def _probe_voters(scenario: Scenario) -> list[AgentSpec]:
    return [a for a in scenario.agents if a.kind is not AgentKind.ABSTAINER]


def _profile_tally(
    scenario: Scenario,
    setup: SimulationSetup,
    options: tuple[str, ...],
    choices: dict[str, str],
) -> TallyResult:
    """Tally one preference profile: every voter commits its full balance."""
    spec = scenario.proposals[0]
    start, end = spec.voting_window.start, spec.voting_window.end
    votes: list[VoteRecord | ConvictionState] = []
    for agent in _probe_voters(scenario):
        option = choices[agent.id]
        for wallet in setup.wallets_by_agent[agent.id]:
            if scenario.mechanism is Mechanism.CONVICTION:
                votes.append(
                    ConvictionState(
                        wallet=wallet,
                        option=option,
                        tokens=setup.balances[wallet],
                        held_since=start,
                    )
                )
            else:
                votes.append(
                    VoteRecord(
                        wallet=wallet,
                        proposal=spec.id,
                        option=option,
                        committed=setup.balances[wallet],
                        cast_at=start,
                    )
                )
    vote_filter = setup.vote_filter()
    if vote_filter is not None:
        votes = list(vote_filter(votes).votes)
    return tally(
        votes,
        scenario.mechanism,
        supply=scenario.supply,
        wallet_universe_size=setup.wallet_universe_size,
        quorum=scenario.quorum,
        now=end,
        conviction=scenario.conviction,
        options=options,
    )


def _check_bounds(scenario: Scenario) -> tuple[list[AgentSpec], tuple[str, ...]]:
    voters = _probe_voters(scenario)
    options = scenario.proposals[0].options
    if len(voters) > MAX_PROBE_AGENTS:
        raise InstanceTooLarge(
            f"{len(voters)} voting agents exceed the enumeration bound of {MAX_PROBE_AGENTS}"
        )
    if len(options) > MAX_PROBE_OPTIONS:
        raise InstanceTooLarge(
            f"{len(options)} options exceed the enumeration bound of {MAX_PROBE_OPTIONS}"
        )
    return voters, options


def dictator_probe(scenario: Scenario, *, setup: SimulationSetup | None = None) -> tuple[str, ...]:
    """Agents whose chosen option wins in every single-choice profile.

    Enumerates (#options)^(#voters) profiles; a tie or quorum failure in any
    profile clears every agent whose choice failed to win it.
    """
    voters, options = _check_bounds(scenario)
    if setup is None:
        setup = build_setup(scenario)
    candidates = {a.id for a in voters}
    for profile in product(options, repeat=len(voters)):
        if not candidates:
            break
        choices = {agent.id: option for agent, option in zip(voters, profile)}
        outcome = _profile_tally(scenario, setup, options, choices).outcome
        winner = outcome.option if outcome.is_winner() else None
        candidates = {a for a in candidates if choices[a] == winner}
    return tuple(a.id for a in voters if a.id in candidates)


@dataclass(frozen=True, slots=True)
class IiaWitness:
    """A profile where deleting a losing option changes the winner."""

    profile: tuple[tuple[str, tuple[str, ...]], ...]  # (agent id, ranking)
    removed_option: str
    winner_before: str
    winner_after: str

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "profile": {agent: list(ranking) for agent, ranking in self.profile},
            "removed_option": self.removed_option,
            "winner_before": self.winner_before,
            "winner_after": self.winner_after,
        }


def iia_probe(scenario: Scenario, *, setup: SimulationSetup | None = None) -> IiaWitness | None:
    """Search ranking profiles for an independence-of-irrelevant-alternatives breach.

    Every voter ranks all options; ballots are top choices.  For each profile
    with a unique winner, each non-winning option is deleted and ballots fall
    to the next surviving preference.  A changed (unique) winner is returned
    as the witness.  Two-option instances trivially have none.
    """
    voters, options = _check_bounds(scenario)
    if len(options) < 3:
        return None
    if setup is None:
        setup = build_setup(scenario)
    rankings = list(permutations(options))
    for profile in product(rankings, repeat=len(voters)):
        choices = {agent.id: ranking[0] for agent, ranking in zip(voters, profile)}
        outcome = _profile_tally(scenario, setup, options, choices).outcome
        if not outcome.is_winner():
            continue
        before = outcome.option
        for removed in options:
            if removed == before:
                continue
            survivors = tuple(o for o in options if o != removed)
            fallback = {
                agent.id: next(o for o in ranking if o != removed)
                for agent, ranking in zip(voters, profile)
            }
            after_outcome = _profile_tally(scenario, setup, survivors, fallback).outcome
            if after_outcome.is_winner() and after_outcome.option != before:
                return IiaWitness(
                    profile=tuple(
                        (agent.id, tuple(ranking)) for agent, ranking in zip(voters, profile)
                    ),
                    removed_option=removed,
                    winner_before=before,
                    winner_after=after_outcome.option,
                )
    return None
