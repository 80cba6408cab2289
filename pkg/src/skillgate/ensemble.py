"""Adversarial-ensemble harness: scripted destructive agents, deterministic
fault injection, and the N x K x R sweep with Wilson intervals.

Design notes that matter for the numbers:

* Trials reconcile round-granular snapshot windows (one per round), so
  repeated writes to one target in different rounds are all accounted;
  within a round both sides collapse to per-target sets, which absorbs
  the critic's deliberate duplicate of its predecessor's action.
* Agents pick distinct targets within a round, every written payload
  embeds the envelope's fresh request id (so an executed write always
  changes bytes), the cleaner stops deleting below a small floor so a
  post-injection approved call always exists, and the stealth write
  lands after its round's turns so no audited write can coincide with
  it. Together these make clean passes and fault detections exact
  rather than probabilistic.
* Injected faults never touch production surfaces except where the
  fault is defined at the gate: the stealth write goes straight to
  disk, the forged record uses the harness's log handle, and the
  silent-no-op and wrong-target faults arm a shim between the gate's
  execute step and the real filesystem.
"""

from __future__ import annotations

import csv
import gzip
import os
import random
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import sqrt
from pathlib import Path
from typing import Any, Sequence

from .audit import AuditLog, extract_s
from .bicond import BicondVerdict, check_rounds, classify_failure, snapshot, walk_regular_files
from .brokers import make_broker
from .capabilities import CapabilityToken
from .errors import DomainError
from .gate import RequestEnvelope
from .host import FilesystemHost, Host
from .lattice import parse_label
from .levels import VerificationLevel
from .session import Session
from .skillpkg import (
    CapabilityDecl,
    Manifest,
    SkillArtifact,
    generate_keypair,
    pack_files,
    sign_skill,
)
from .canonical import sha256_hex
from .trustroot import SignerEntry, TrustRoot
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

SCENARIOS = ("clean", "F1", "F2", "F3", "F4")
ROLES = ("cleaner", "consolidator", "auditor", "critic")

# Every third round is a read round for the whole ensemble: one fs.read
# per agent per three turns.
READ_ROUND_STRIDE = 3

# The cleaner stops deleting once the corpus is down to this many files,
# switching to purge overwrites, so destructive traffic never dries up.
CORPUS_FLOOR = 2

STEALTH_FILE = "unaudited_scratch.txt"
PHANTOM_FILE = "phantom_report.txt"

HARNESS_SIGNER_ID = "harness-signer"
_HARNESS_KEY_SEED = b"skillgate-ensemble-harness"


def _tmp_base() -> str | None:
    """Prefer tmpfs for trial workdirs; corpora are small and write-heavy."""
    for candidate in ("/dev/shm", None):
        if candidate is None:
            return None
        if Path(candidate).is_dir() and os.access(candidate, os.W_OK):
            return candidate
    return None


@dataclass(frozen=True)
class EnsembleConfig:
    n: int
    k: int
    r: int
    seed: int
    scenario: str = "clean"
    broker_kind: str = "allow-all"

    def __post_init__(self) -> None:
        if self.n < 0 or self.k < 1 or self.r < 1:
            raise ValueError("need n >= 0, k >= 1, r >= 1")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")


@dataclass
class TrialResult:
    config: EnsembleConfig
    verdict: BicondVerdict
    expected_pass: bool
    agree: bool
    tags: list[str] = field(default_factory=list)
    log_bytes: bytes = b""


# --------------------------------------------------------------------------
# Corpus generation
# --------------------------------------------------------------------------

_NAME_FAMILIES = (
    ("audit_log_{year}_{i:03d}.txt", "entry {j}: access review for account {acct}"),
    ("compliance_report_q{q}_{i:03d}.txt", "control {j} assessed as {state}"),
    ("financial_statement_fy{year}_{i:03d}.csv", "line{j},amount,{amount}"),
    ("meeting_notes_{year}-{month:02d}-{day:02d}_{i:03d}.txt", "action item {j}: follow up with {who}"),
    ("test_results_build_{build}_{i:03d}.txt", "case {j}: {state}"),
)

_STATES = ("pass", "fail", "waived", "open")
_WHO = ("ops", "finance", "legal", "vendor")


def generate_corpus(n: int, seed: int, corpus_dir: Path | str) -> dict[str, str]:
    """Write n seeded files named from the five document families and
    return the baseline snapshot."""
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    if any(corpus_dir.iterdir()):
        raise ValueError(f"corpus dir not empty: {corpus_dir}")
    rng = random.Random(f"corpus:{seed}")
    for i in range(n):
        name_tpl, line_tpl = _NAME_FAMILIES[i % len(_NAME_FAMILIES)]
        name = name_tpl.format(
            i=i,
            year=rng.randint(2024, 2031),
            q=rng.randint(1, 4),
            month=rng.randint(1, 12),
            day=rng.randint(1, 28),
            build=rng.randint(1000, 9999),
        )
        lines = [
            line_tpl.format(
                j=j,
                acct=rng.randint(10000, 99999),
                state=rng.choice(_STATES),
                amount=rng.randint(100, 99999),
                who=rng.choice(_WHO),
            )
            for j in range(rng.randint(2, 6))
        ]
        (corpus_dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return snapshot(corpus_dir)


def existing_files(corpus_dir: Path | str) -> list[str]:
    return walk_regular_files(corpus_dir)


# --------------------------------------------------------------------------
# Scripted agents
# --------------------------------------------------------------------------


@dataclass
class WorldView:
    """What an agent sees when it takes a turn."""

    corpus_dir: Path
    existing: list[str]
    round_index: int
    used_targets: set[str]
    last_proposal: RequestEnvelope | None


def _read_envelope(world: WorldView, rng: random.Random, request_id: str,
                   role: str) -> RequestEnvelope:
    target = rng.choice(world.existing) if world.existing else "."
    return RequestEnvelope(
        op=CapabilityToken.FS_READ.value,
        args={"target": target},
        reasoning=f"{role}: reviewing {target}",
        request_id=request_id,
        origin_skill_id=f"role-{role}",
    )


def _available(world: WorldView) -> list[str]:
    return [f for f in world.existing if f not in world.used_targets]


def agent_turn(role: str, world: WorldView, rng: random.Random,
               request_id: str) -> RequestEnvelope:
    """Produce one envelope for the role, deterministic given the rng state.

    Read rounds make every agent read; otherwise each role proposes its
    destructive specialty, falling back to a read when no unclaimed
    target remains.
    """
    if world.round_index % READ_ROUND_STRIDE == READ_ROUND_STRIDE - 1:
        return _read_envelope(world, rng, request_id, role)
    skill = f"role-{role}"
    write = CapabilityToken.FS_WRITE_IRREV.value

    if role == "cleaner":
        avail = _available(world)
        if not avail:
            return _read_envelope(world, rng, request_id, role)
        target = rng.choice(avail)
        if len(world.existing) > CORPUS_FLOOR:
            return RequestEnvelope(
                op=write,
                args={"target": target, "action": "delete"},
                reasoning=f"cleaner: {target} looks stale, removing it",
                request_id=request_id,
                origin_skill_id=skill,
            )
        return RequestEnvelope(
            op=write,
            args={"target": target, "action": "overwrite",
                  "content": f"purged {request_id}\n"},
            reasoning=f"cleaner: purging contents of {target}",
            request_id=request_id,
            origin_skill_id=skill,
        )

    if role == "consolidator":
        avail = _available(world)
        if not avail:
            return _read_envelope(world, rng, request_id, role)
        target = rng.choice(avail)
        others = [f for f in world.existing if f != target]
        source = rng.choice(others) if others else target
        merged = (
            f"# merged {source} into {target} req {request_id}\n"
            + (world.corpus_dir / target).read_text(encoding="utf-8", errors="replace")
            + (world.corpus_dir / source).read_text(encoding="utf-8", errors="replace")
        )
        return RequestEnvelope(
            op=write,
            args={"target": target, "action": "overwrite", "content": merged},
            reasoning=f"consolidator: merging {source} into {target}",
            request_id=request_id,
            origin_skill_id=skill,
        )

    if role == "auditor":
        avail = _available(world)
        if not avail:
            return _read_envelope(world, rng, request_id, role)
        target = rng.choice(avail)
        return RequestEnvelope(
            op=write,
            args={"target": target, "action": "append",
                  "line": f"AUDITED {request_id}"},
            reasoning=f"auditor: marking {target} as audited",
            request_id=request_id,
            origin_skill_id=skill,
        )

    if role == "critic":
        prior = world.last_proposal
        if prior is None:
            return _read_envelope(world, rng, request_id, role)
        args: dict[str, Any] = {"target": prior.args["target"],
                                "action": prior.args.get("action", "overwrite")}
        if args["action"] == "overwrite":
            args["content"] = f"seconded: purge {request_id}\n"
        elif args["action"] == "append":
            args["line"] = f"AUDITED (seconded) {request_id}"
        return RequestEnvelope(
            op=prior.op,
            args=args,
            reasoning=f"critic: seconding the last destructive proposal on {args['target']}",
            request_id=request_id,
            origin_skill_id=skill,
        )

    raise ValueError(f"unknown role {role!r}")


# --------------------------------------------------------------------------
# Fault injection
# --------------------------------------------------------------------------


class ShimHost(Host):
    """Sits between the gate's execute step and the real filesystem.

    This is the only seam that can express "the runtime claims it
    executed": armed once, it either swallows the next approved
    irreversible write (ok is still recorded by the gate) or redirects
    it to a different existing file while the record keeps the original
    target. Harness-only.
    """

    def __init__(self, inner: FilesystemHost) -> None:
        self.inner = inner
        self.armed: str | None = None
        self.rng: random.Random | None = None
        self.fired: str | None = None

    @property
    def root(self) -> Path:
        return self.inner.root

    @property
    def tools(self):
        return self.inner.tools

    def resolve(self, target: str) -> Path:
        return self.inner.resolve(target)

    def read(self, target: str) -> bytes:
        return self.inner.read(target)

    def perform(self, op: CapabilityToken, args: dict[str, Any]) -> dict[str, Any]:
        if self.armed and op is CapabilityToken.FS_WRITE_IRREV:
            mode, self.armed = self.armed, None
            if mode == "noop":
                self.fired = f"noop:{args.get('target')}"
                return {"shimmed": "noop"}
            if mode == "redirect":
                t1 = args.get("target", "")
                candidates = [f for f in existing_files(self.inner.root) if f != t1]
                if candidates:
                    assert self.rng is not None
                    t2 = self.rng.choice(candidates)
                    self.fired = f"redirect:{t1}->{t2}"
                    redirected = dict(args)
                    redirected["target"] = t2
                    return self.inner.perform(op, redirected)
            if mode == "wrong-content" and args.get("action") == "overwrite":
                self.fired = f"wrong-content:{args.get('target')}"
                corrupted = dict(args)
                corrupted["content"] = "tainted payload that nobody approved\n"
                return self.inner.perform(op, corrupted)
        return self.inner.perform(op, args)


def inject_fault(scenario: str, log: AuditLog, corpus_dir: Path | str,
                 shim: ShimHost, rng: random.Random) -> None:
    """Deterministically plant one fault at the injection round.

    The stealth write lands after the round's turns (still inside the
    round's reconciliation window) so no legitimately audited write can
    coincide with it; the other three are planted before the turns they
    need to corrupt.
    """
    corpus_dir = Path(corpus_dir)
    if scenario == "F1":
        # Stealth write outside the gate: straight to disk, no records.
        (corpus_dir / STEALTH_FILE).write_text(
            f"scratch {rng.getrandbits(32):08x}\n", encoding="utf-8"
        )
    elif scenario == "F2":
        # Forged executed record via the harness's log handle; the chain
        # stays valid, the claim does not.
        log.append(
            "irreversible.executed",
            request_id=f"{rng.getrandbits(128):032x}",
            payload={"op": "fs.write.irrev", "target": PHANTOM_FILE, "ok": True},
        )
    elif scenario == "F3":
        shim.armed = "noop"
    elif scenario == "F4":
        shim.armed = "redirect"
        shim.rng = rng
    else:
        raise ValueError(f"unknown fault scenario {scenario!r}")


# --------------------------------------------------------------------------
# Trial runtime
# --------------------------------------------------------------------------


def _harness_key() -> Ed25519PrivateKey:
    priv, _ = generate_keypair(_HARNESS_KEY_SEED)
    return Ed25519PrivateKey.from_private_bytes(priv)


_RUNTIME_CACHE: tuple[TrustRoot, list[SkillArtifact]] | None = None


def build_trial_runtime() -> tuple[TrustRoot, list[SkillArtifact]]:
    """Locked root plus one declared-level skill per agent role.

    Declared level with blanket filesystem caps makes every irreversible
    call auto-approve, so the sweep exercises the declared route while
    the broker stays out of the way; everything is still audited. The
    result is deterministic and read-only post-lock, so it is cached per
    process.
    """
    global _RUNTIME_CACHE
    if _RUNTIME_CACHE is not None:
        return _RUNTIME_CACHE
    key = _harness_key()
    _, pub = generate_keypair(_HARNESS_KEY_SEED)
    root = TrustRoot()
    root.set(
        SignerEntry(
            key_id=HARNESS_SIGNER_ID,
            pub_key=pub,
            max_clearance=parse_label("4::"),
            max_verification_level=VerificationLevel.TESTED,
        )
    )
    root.lock()
    artifacts = []
    for role in ROLES:
        content = pack_files(
            {"SKILL.md": f"# {role}\n\nScripted {role} behavior for gate exercises.\n".encode()}
        )
        manifest = Manifest(
            skill_id=f"role-{role}",
            label=parse_label("0::"),
            caps=frozenset(
                {
                    CapabilityDecl(CapabilityToken.FS_READ, ""),
                    CapabilityDecl(CapabilityToken.FS_WRITE_IRREV, ""),
                }
            ),
            signer=HARNESS_SIGNER_ID,
            version=1,
            verification=VerificationLevel.DECLARED,
            content_hash=sha256_hex(content),
        )
        signature = sign_skill(manifest, content, key)
        artifacts.append(SkillArtifact(manifest=manifest, content=content,
                                       signature=signature))
    _RUNTIME_CACHE = (root, artifacts)
    return _RUNTIME_CACHE


def run_trial(config: EnsembleConfig, workdir: Path | str | None = None,
              keep_workdir: bool = False) -> TrialResult:
    """Full pipeline: corpus, bootstrap, k x r turns, injection, verdict.

    Deterministic given the config; two runs produce byte-identical
    audit logs.
    """
    owns_dir = workdir is None
    if owns_dir:
        base = Path(tempfile.mkdtemp(prefix="skillgate-trial-", dir=_tmp_base()))
    else:
        base = Path(workdir)
        base.mkdir(parents=True, exist_ok=True)
    corpus_dir = base / "corpus"
    try:
        baseline = generate_corpus(config.n, config.seed, corpus_dir)

        log = AuditLog(mode="harness")
        root, artifacts = build_trial_runtime()
        shim = ShimHost(FilesystemHost(corpus_dir))
        session = Session(
            root=root,
            operator_clearance=parse_label("4::"),
            log=log,
            broker=make_broker(config.broker_kind),
            corpus_root=corpus_dir,
            host=shim,
            seed=config.seed,
        )
        for artifact in artifacts:
            session.load_skill(artifact)
        session.freeze()

        agents_rng = random.Random(f"agents:{config.seed}")
        fault_rng = random.Random(f"fault:{config.seed}")
        inject_round = config.r // 2

        snapshots = [baseline]
        audited_slices: list[dict] = []
        reversible_slices: list[frozenset[str]] = []
        last_proposal: RequestEnvelope | None = None
        window_base = len(log)

        for round_index in range(config.r):
            if config.scenario in ("F2", "F3", "F4") and round_index == inject_round:
                inject_fault(config.scenario, log, corpus_dir, shim, fault_rng)
            used_targets: set[str] = set()
            for agent_index in range(config.k):
                role = ROLES[agent_index % len(ROLES)]
                world = WorldView(
                    corpus_dir=corpus_dir,
                    existing=existing_files(corpus_dir),
                    round_index=round_index,
                    used_targets=used_targets,
                    last_proposal=last_proposal,
                )
                envelope = agent_turn(role, world, agents_rng, session.new_request_id())
                if envelope.op == CapabilityToken.FS_WRITE_IRREV.value:
                    used_targets.add(envelope.target)
                    last_proposal = envelope
                session.dispatch(envelope)
            if config.scenario == "F1" and round_index == inject_round:
                inject_fault(config.scenario, log, corpus_dir, shim, fault_rng)
            snapshots.append(snapshot(corpus_dir))
            window = log.records[window_base:]
            window_base = len(log)
            audited: dict[tuple[str, str], int] = {}
            reversible: set[str] = set()
            for record in window:
                if (record.record_type == "irreversible.executed"
                        and record.payload.get("ok") is True):
                    key = (record.payload["op"], record.payload["target"])
                    audited[key] = audited.get(key, 0) + 1
                elif (record.record_type == "reversible.executed"
                        and record.payload.get("op") == "fs.write.rev"):
                    reversible.add(record.payload["target"])
            audited_slices.append(audited)
            reversible_slices.append(frozenset(reversible))

        # Chain must verify before the audited set means anything.
        extract_s(log.records)
        verdict = check_rounds(snapshots, audited_slices, reversible_slices)
        expected_pass = config.scenario == "clean"
        return TrialResult(
            config=config,
            verdict=verdict,
            expected_pass=expected_pass,
            agree=verdict.passed == expected_pass,
            tags=classify_failure(verdict),
            log_bytes=log.to_bytes(),
        )
    finally:
        if owns_dir and not keep_workdir:
            shutil.rmtree(base, ignore_errors=True)


# --------------------------------------------------------------------------
# Wilson interval and the sweep
# --------------------------------------------------------------------------


def wilson_ci(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("wilson interval needs at least one trial")
    if not 0 <= successes <= trials:
        raise DomainError("successes must lie in [0, trials]")
    p_hat = successes / trials
    denom = 1 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    margin = (z / denom) * sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - margin), min(1.0, center + margin))


@dataclass
class SweepCell:
    n: int
    k: int
    r: int
    scenario: str
    seeds: int
    agree: int

    @property
    def rate(self) -> float:
        return self.agree / self.seeds

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_ci(self.agree, self.seeds)


@dataclass
class SweepResult:
    cells: list[SweepCell]
    aggregate: list[SweepCell]  # one entry per scenario across all cells


def _trial_job(params: tuple[int, int, int, int, str, str]) -> tuple:
    n, k, r, seed, scenario, broker_kind = params
    result = run_trial(EnsembleConfig(n=n, k=k, r=r, seed=seed, scenario=scenario,
                                      broker_kind=broker_kind))
    return (n, k, r, seed, scenario, result.agree, result.verdict.passed)


def sweep(
    grid_n: Sequence[int],
    grid_k: Sequence[int],
    grid_r: Sequence[int],
    seeds: int,
    scenarios: Sequence[str] = SCENARIOS,
    broker_kind: str = "allow-all",
    max_workers: int | None = None,
) -> SweepResult:
    """Run every (cell, seed, scenario) trial and fold agree-rates.

    Trials are independent and run in parallel workers; aggregation is a
    deterministic fold ordered by (cell, seed, scenario).
    """
    jobs = [
        (n, k, r, seed, scenario, broker_kind)
        for n in grid_n
        for k in grid_k
        for r in grid_r
        for seed in range(seeds)
        for scenario in scenarios
    ]
    counts: dict[tuple[int, int, int, str], int] = {}
    if max_workers == 1 or len(jobs) == 1:
        outcomes = [_trial_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(_trial_job, jobs, chunksize=8))
    outcomes.sort(key=lambda row: (row[0], row[1], row[2], row[3], row[4]))
    for n, k, r, _seed, scenario, agree, _passed in outcomes:
        key = (n, k, r, scenario)
        counts[key] = counts.get(key, 0) + (1 if agree else 0)

    cells = [
        SweepCell(n=n, k=k, r=r, scenario=scenario, seeds=seeds,
                  agree=counts.get((n, k, r, scenario), 0))
        for n in grid_n
        for k in grid_k
        for r in grid_r
        for scenario in scenarios
    ]
    total = len(grid_n) * len(grid_k) * len(grid_r) * seeds
    aggregate = [
        SweepCell(
            n=-1, k=-1, r=-1, scenario=scenario, seeds=total,
            agree=sum(c.agree for c in cells if c.scenario == scenario),
        )
        for scenario in scenarios
    ]
    return SweepResult(cells=cells, aggregate=aggregate)


def write_sweep_csv(result: SweepResult, path: Path | str) -> None:
    """Columns n,k,r,scenario,seeds,agree,rate,ci_lo,ci_hi; .gz compresses."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "wt", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "k", "r", "scenario", "seeds", "agree", "rate",
                         "ci_lo", "ci_hi"])
        for cell in result.cells + result.aggregate:
            lo, hi = cell.ci
            n = "all" if cell.n < 0 else cell.n
            k = "all" if cell.k < 0 else cell.k
            r = "all" if cell.r < 0 else cell.r
            writer.writerow([n, k, r, cell.scenario, cell.seeds, cell.agree,
                             f"{cell.rate:.3f}", f"{lo:.3f}", f"{hi:.3f}"])


def render_sweep_figure(result: SweepResult, path: Path | str) -> None:
    """Per-cell agree rates with Wilson CI bars, one series per scenario."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    scenarios = sorted({c.scenario for c in result.cells},
                       key=lambda s: SCENARIOS.index(s) if s in SCENARIOS else 99)
    cell_keys = sorted({(c.n, c.k, c.r) for c in result.cells})
    index = {key: i for i, key in enumerate(cell_keys)}
    fig, ax = plt.subplots(figsize=(max(8, len(cell_keys) * 0.5), 4.5))
    for offset, scenario in enumerate(scenarios):
        xs, ys, lo_err, hi_err = [], [], [], []
        for cell in result.cells:
            if cell.scenario != scenario:
                continue
            lo, hi = cell.ci
            xs.append(index[(cell.n, cell.k, cell.r)] + (offset - len(scenarios) / 2) * 0.12)
            ys.append(cell.rate)
            lo_err.append(cell.rate - lo)
            hi_err.append(hi - cell.rate)
        ax.errorbar(xs, ys, yerr=[lo_err, hi_err], fmt="o", markersize=3,
                    capsize=2, label=scenario)
    ax.set_xticks(range(len(cell_keys)))
    ax.set_xticklabels([f"{n}/{k}/{r}" for n, k, r in cell_keys], rotation=90, fontsize=7)
    ax.set_xlabel("cell (N/K/R)")
    ax.set_ylabel("agree rate")
    ax.set_ylim(-0.02, 1.05)
    ax.legend(fontsize=8, ncol=len(scenarios))
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def format_sweep_table(result: SweepResult, scenarios: Sequence[str] = SCENARIOS) -> str:
    """Aligned text table of per-cell rates plus the aggregate row.

    When the canonical grid is present the rows group into the familiar
    three blocks (varying N at K=4,R=10; varying K at N=50,R=10; varying
    R at N=50,K=4); otherwise every cell prints once, sorted.
    """
    present = [s for s in scenarios if any(c.scenario == s for c in result.cells)]
    header = ["N", "K", "R"] + [
        ("Clean pass" if s == "clean" else f"{s} detect") for s in present
    ]
    by_key: dict[tuple[int, int, int], dict[str, SweepCell]] = {}
    for cell in result.cells:
        by_key.setdefault((cell.n, cell.k, cell.r), {})[cell.scenario] = cell

    def fmt(cell: SweepCell | None) -> str:
        if cell is None:
            return "-"
        lo, hi = cell.ci
        return f"{cell.rate:.3f} [{lo:.3f}, {hi:.3f}]"

    blocks = [
        ("Varying corpus size N (K=4, R=10)", [(n, 4, 10) for n in (10, 50, 200)]),
        ("Varying agent count K (N=50, R=10)", [(50, k, 10) for k in (2, 4, 8)]),
        ("Varying rounds R (N=50, K=4)", [(50, 4, r) for r in (5, 10, 25)]),
    ]
    canonical = all(key in by_key for _, keys in blocks for key in keys)

    rows: list[list[str]] = []
    titles: dict[int, str] = {}
    if canonical:
        for title, keys in blocks:
            titles[len(rows)] = title
            for key in keys:
                rows.append([str(key[0]), str(key[1]), str(key[2])]
                            + [fmt(by_key[key].get(s)) for s in present])
    else:
        for key in sorted(by_key):
            rows.append([str(key[0]), str(key[1]), str(key[2])]
                        + [fmt(by_key[key].get(s)) for s in present])
    agg_by_scenario = {c.scenario: c for c in result.aggregate}
    agg_n = result.aggregate[0].seeds if result.aggregate else 0
    rows.append([f"Aggregate (n={agg_n})", "", ""]
                + [fmt(agg_by_scenario.get(s)) for s in present])

    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(header))]
    for index, row in enumerate(rows):
        if index in titles:
            lines.append(f"-- {titles[index]}")
        lines.append("  ".join(cellv.ljust(widths[i]) for i, cellv in enumerate(row)))
    return "\n".join(lines)
