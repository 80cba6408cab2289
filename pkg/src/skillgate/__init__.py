"""skillgate: a skill-aware agent runtime with a verification-keyed HITL
gate, hash-chained audit, and an audit-world reconciliation check."""

from .audit import AuditLog, AuditRecord, ChainVerdict, extract_s, verify_chain
from .bicond import (
    BicondVerdict,
    DeltaEntry,
    check,
    check_rounds,
    classify_failure,
    compute_delta,
    snapshot,
)
from .brokers import (
    AllowAllBroker,
    Broker,
    BrokerDecision,
    DenyAllBroker,
    InteractiveBroker,
    PendingQueue,
    PolicyBroker,
    WebhookBroker,
    make_broker,
    parse_policy,
)
from .buffer import TransactionBuffer
from .capabilities import CapabilityToken, target_matches
from .ensemble import (
    EnsembleConfig,
    SweepResult,
    TrialResult,
    generate_corpus,
    run_trial,
    sweep,
    wilson_ci,
)
from .errors import SkillGateError
from .gate import DispatchOutcome, RequestEnvelope, Route, classify_reversibility, route_for
from .host import FilesystemHost, Host, NullHost
from .lattice import Label, dominated_by, join, parse_label
from .levels import VerificationLevel
from .session import Session
from .skillpkg import (
    CapabilityDecl,
    LoadedSkill,
    Manifest,
    SkillArtifact,
    canonicalize,
    generate_keypair,
    load_skill,
    parse_manifest,
    sign_skill,
)
from .trustroot import SignerEntry, TrustRoot, load_trust_root, save_trust_root

__version__ = "0.1.0"
