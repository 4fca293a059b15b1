"""govlab: deterministic DAO governance mechanisms under adversarial pressure.

Token-weighted, quorum-gated, quadratic, and conviction voting; Sybil
wallet-splitting attacks and identity-verification mitigations; a proposal
lifecycle engine writing a hash-chained audit ledger; and a scenario-driven
simulation harness whose runs are reproducible byte for byte.
"""

from .core import (
    GovlabError,
    IdentityId,
    ProposalId,
    TallyOutcome,
    TallyResult,
    TokenAmount,
    VoteRecord,
    VotingPower,
    WalletId,
    canonical_json,
    power_sum,
)
from .governance import GovernanceEngine, Phase, Proposal, Window, replay
from .identity import (
    FilterReport,
    IdentityClaim,
    IdentityRegistry,
    ProviderParams,
    RegistryMode,
    RejectionReason,
    SimulatedProvider,
    VerificationOutcome,
    VotePolicy,
    filter_and_collapse,
    simulate_provider,
)
from .ledger import Ledger, LedgerEntry, verify_chain
from .mechanisms import (
    ConvictionParams,
    ConvictionState,
    Mechanism,
    QuorumBasis,
    QuorumConfig,
    conviction_power,
    power_quadratic,
    power_token,
    switch_vote,
    tally,
)
from .probes import IiaWitness, InstanceTooLarge, dictator_probe, iia_probe
from .scenario import (
    AgentKind,
    AgentSpec,
    Scenario,
    ScenarioValidationError,
    load_preset,
    load_scenario,
    loads_scenario,
    preset_names,
)
from .simulation import RunResult, compare_mechanisms, gini, min_controlling_set, run
from .sybil import SplitStrategy, SybilReport, best_split, split_uniform, sybil_gain

__version__ = "0.1.0"

__all__ = [
    "AgentKind",
    "AgentSpec",
    "ConvictionParams",
    "ConvictionState",
    "FilterReport",
    "GovernanceEngine",
    "GovlabError",
    "IdentityClaim",
    "IdentityId",
    "IdentityRegistry",
    "IiaWitness",
    "InstanceTooLarge",
    "Ledger",
    "LedgerEntry",
    "Mechanism",
    "Phase",
    "Proposal",
    "ProposalId",
    "ProviderParams",
    "QuorumBasis",
    "QuorumConfig",
    "RegistryMode",
    "RejectionReason",
    "RunResult",
    "Scenario",
    "ScenarioValidationError",
    "SimulatedProvider",
    "SplitStrategy",
    "SybilReport",
    "TallyOutcome",
    "TallyResult",
    "TokenAmount",
    "VerificationOutcome",
    "VoteRecord",
    "VotePolicy",
    "VotingPower",
    "WalletId",
    "Window",
    "best_split",
    "canonical_json",
    "compare_mechanisms",
    "conviction_power",
    "dictator_probe",
    "filter_and_collapse",
    "gini",
    "iia_probe",
    "load_preset",
    "load_scenario",
    "loads_scenario",
    "min_controlling_set",
    "power_quadratic",
    "power_sum",
    "power_token",
    "preset_names",
    "replay",
    "run",
    "simulate_provider",
    "split_uniform",
    "switch_vote",
    "sybil_gain",
    "tally",
    "verify_chain",
]
