"""Operator command line: key and root management, skill signing and
verification, session running, the ensemble harness, audit and
reconciliation checks, and the approval API server.

Unknown flags are hard errors; there is no flag anywhere that disables
the gate lifecycle, the audit chain, or classification.
"""

from __future__ import annotations

import argparse
import base64
import json
import os
import sys
import threading
from pathlib import Path

from .audit import AuditLog, read_records, verify_chain
from .bicond import check, classify_failure, compute_delta, read_snapshot, snapshot, write_snapshot
from .brokers import DEFAULT_DECISION_TIMEOUT, PendingQueue, make_broker
from .canonical import sha256_hex
from .capabilities import CapabilityToken
from .ensemble import (
    SCENARIOS,
    EnsembleConfig,
    format_sweep_table,
    render_sweep_figure,
    run_trial,
    sweep,
    write_sweep_csv,
)
from .errors import LoaderError, SkillGateError
from .gate import RequestEnvelope
from .lattice import DEFAULT_MAX_RANK, parse_label
from .levels import VerificationLevel
from .session import Session
from .skillpkg import (
    CapabilityDecl,
    Manifest,
    ReplayGuard,
    collect_package_files,
    generate_keypair,
    load_skill,
    pack_files,
    read_skill_package,
    sign_skill,
    write_skill_package,
)
from .trustroot import SignerEntry, TrustRoot, load_trust_root, save_trust_root

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey


def _profile() -> str:
    profile = os.environ.get("SKILLGATE_PROFILE", "strict")
    if profile not in ("strict", "dev"):
        raise SkillGateError(f"unknown SKILLGATE_PROFILE {profile!r}")
    return profile


def _load_keyfile(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# --------------------------------------------------------------------------
# Subcommand handlers
# --------------------------------------------------------------------------


def cmd_keygen(args: argparse.Namespace) -> int:
    priv, pub = generate_keypair()
    doc = {
        "keyId": args.key_id,
        "privateKey": priv.hex(),
        "publicKey": pub.hex(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote keypair {args.key_id} to {args.out}")
    return 0


def cmd_root_add(args: argparse.Namespace) -> int:
    path = Path(args.root)
    root = load_trust_root(path) if path.exists() else TrustRoot()
    key = _load_keyfile(args.key)
    entry = SignerEntry(
        key_id=args.key_id or key["keyId"],
        pub_key=bytes.fromhex(key["publicKey"]),
        max_clearance=parse_label(args.max_clearance),
        max_verification_level=VerificationLevel.parse(args.max_level),
    )
    root.set(entry)
    save_trust_root(root, path)
    print(f"added signer {entry.key_id} to {path}")
    return 0


def cmd_root_lock(args: argparse.Namespace) -> int:
    root = load_trust_root(args.root)
    root.lock()
    save_trust_root(root, args.root)
    print(f"locked trust root {args.root} ({len(root.key_ids())} signers)")
    return 0


def cmd_root_show(args: argparse.Namespace) -> int:
    root = load_trust_root(args.root)
    print(f"locked: {root.locked}")
    for key_id in root.key_ids():
        entry = root.resolve(key_id)
        assert entry is not None
        print(
            f"  {key_id}: clearance={entry.max_clearance} "
            f"level<={entry.max_verification_level.token} "
            f"pub={base64.b64encode(entry.pub_key).decode()}"
        )
    return 0


def _parse_cap(text: str) -> CapabilityDecl:
    token, _, target = text.partition(":")
    return CapabilityDecl(token=CapabilityToken.parse(token), target=target)


def cmd_skill_sign(args: argparse.Namespace) -> int:
    skill_dir = Path(args.dir)
    key = _load_keyfile(args.key)
    content = pack_files(collect_package_files(skill_dir))
    caps = frozenset(_parse_cap(c) for c in (args.cap or []))
    manifest = Manifest(
        skill_id=args.skill_id,
        label=parse_label(args.label),
        caps=caps,
        signer=args.signer or key["keyId"],
        version=args.version,
        verification=VerificationLevel.parse(args.verification),
        content_hash=sha256_hex(content),
    )
    private = Ed25519PrivateKey.from_private_bytes(bytes.fromhex(key["privateKey"]))
    signature = sign_skill(manifest, content, private)
    write_skill_package(skill_dir, manifest, signature)
    print(f"signed {manifest.skill_id} v{manifest.version} "
          f"at level {manifest.verification.token}")
    return 0


class _StandaloneLoadContext:
    """Session stand-in for `skill verify`: fresh replay guard, no registry."""

    def __init__(self, max_rank: int) -> None:
        self.max_rank = max_rank
        self.replay_guard = ReplayGuard()
        self.log = AuditLog(mode="harness")

    def require_bootstrap_phase(self) -> None:
        return

    def register_loaded(self, loaded) -> None:
        return


def cmd_skill_verify(args: argparse.Namespace) -> int:
    root = load_trust_root(args.root)
    artifact = read_skill_package(args.dir)
    context = _StandaloneLoadContext(max_rank=args.max_rank)
    try:
        loaded = load_skill(root, artifact, parse_label(args.operator_clearance), context)
    except LoaderError as exc:
        print(str(exc))
        return 1
    manifest = loaded.manifest
    print(f"ok: {manifest.skill_id} v{manifest.version} level={manifest.verification.token} "
          f"label={manifest.label} signer={manifest.signer}")
    return 0


def _build_session(args: argparse.Namespace, log_mode: str = "production") -> Session:
    profile = _profile()
    root = load_trust_root(args.root)
    log = AuditLog(path=args.log, mode=log_mode)
    queue = PendingQueue()
    broker_kind = args.broker or ("interactive" if profile == "dev" else "deny-all")
    broker = make_broker(
        broker_kind,
        policy_path=args.policy,
        queue=queue,
        timeout=args.timeout,
    )
    session = Session(
        root=root,
        operator_clearance=parse_label(args.operator_clearance),
        log=log,
        broker=broker,
        corpus_root=args.corpus,
        profile=profile,
        pending_queue=queue,
    )
    for skill_dir in args.skill or []:
        artifact = read_skill_package(skill_dir)
        session.load_skill(artifact, install_path=skill_dir)
    return session


def _dispatch_envelopes(session: Session, envelopes_path: str | None,
                        verbose: bool) -> None:
    if envelopes_path is None:
        return
    with open(envelopes_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            envelope = RequestEnvelope(
                op=raw["op"],
                args=raw.get("args", {}),
                reasoning=raw.get("reasoning", ""),
                origin_skill_id=raw.get("originSkillId", ""),
            )
            outcome = session.dispatch(envelope)
            if verbose:
                print(f"{envelope.op} {envelope.target} -> {outcome.status}")


def cmd_run(args: argparse.Namespace) -> int:
    session = _build_session(args)
    _dispatch_envelopes(session, args.envelopes, verbose=True)
    print(f"session done: {len(session.log)} audit records, halted={session.halted}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .approval_api import create_app

    session = _build_session(args)
    app = create_app(session, shared_token=args.token)
    host, _, port_s = args.bind.partition(":")

    if args.envelopes:
        driver = threading.Thread(
            target=_dispatch_envelopes, args=(session, args.envelopes, True), daemon=True
        )
        driver.start()
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port_s or 8787),
                log_level="info" if session.profile == "dev" else "warning")
    return 0


def cmd_ensemble_trial(args: argparse.Namespace) -> int:
    config = EnsembleConfig(
        n=args.n, k=args.k, r=args.r, seed=args.seed,
        scenario=args.scenario, broker_kind=args.broker,
    )
    result = run_trial(config, workdir=args.workdir,
                       keep_workdir=args.workdir is not None)
    verdict = result.verdict
    status = "PASS" if verdict.passed else "FAIL"
    expectation = "expected" if result.agree else "UNEXPECTED"
    print(f"trial n={args.n} k={args.k} r={args.r} seed={args.seed} "
          f"scenario={args.scenario}: {status} ({expectation})")
    for entry in verdict.unexplained_changes:
        print(f"  unexplained change: {entry.op} {entry.target} ({entry.kind})")
    for op, target in verdict.unmatched_executions:
        print(f"  unmatched execution: {op} {target}")
    if result.tags:
        print(f"  failure shape: {', '.join(result.tags)}")
    if args.log_out:
        Path(args.log_out).write_bytes(result.log_bytes)
        print(f"  audit log written to {args.log_out}")
    return 0 if result.agree else 1


def _parse_grid(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def cmd_ensemble_sweep(args: argparse.Namespace) -> int:
    scenarios = tuple(args.scenarios.split(",")) if args.scenarios else SCENARIOS
    result = sweep(
        grid_n=_parse_grid(args.grid_n),
        grid_k=_parse_grid(args.grid_k),
        grid_r=_parse_grid(args.grid_r),
        seeds=args.seeds,
        scenarios=scenarios,
        broker_kind=args.broker,
        max_workers=args.workers,
    )
    print(format_sweep_table(result, scenarios))
    if args.out:
        write_sweep_csv(result, args.out)
        print(f"wrote {args.out}")
        fig_path = args.fig
        if fig_path is None and not args.no_fig:
            out = Path(args.out)
            fig_path = str(out.with_suffix(".png") if out.suffix != ".gz"
                           else out.with_suffix("").with_suffix(".png"))
        if fig_path:
            render_sweep_figure(result, fig_path)
            print(f"wrote {fig_path}")
    bad = [c for c in result.cells if c.agree != c.seeds]
    return 0 if not bad else 1


def cmd_audit_verify(args: argparse.Namespace) -> int:
    records = read_records(args.log)
    verdict = verify_chain(records)
    if verdict.ok:
        print(f"ok: {len(records)} records, chain intact")
        return 0
    print(f"broken at seq {verdict.broken_at}")
    return 1


def cmd_bicond_snapshot(args: argparse.Namespace) -> int:
    snap = snapshot(args.corpus)
    write_snapshot(snap, args.out)
    print(f"wrote {len(snap)} entries to {args.out}")
    return 0


def cmd_bicond_check(args: argparse.Namespace) -> int:
    baseline = read_snapshot(args.baseline)
    current = snapshot(args.corpus)
    delta = compute_delta(baseline, current)
    records = read_records(args.log)
    chain = verify_chain(records)
    if not chain.ok:
        print(f"audit chain broken at seq {chain.broken_at}")
        return 2
    audited: dict[tuple[str, str], int] = {}
    reversible: set[str] = set()
    for record in records:
        if record.record_type == "irreversible.executed" and record.payload.get("ok") is True:
            key = (record.payload["op"], record.payload["target"])
            audited[key] = audited.get(key, 0) + 1
        elif (record.record_type == "reversible.executed"
              and record.payload.get("op") == "fs.write.rev"):
            reversible.add(record.payload["target"])
    verdict = check(delta, audited, reversible_targets=frozenset(reversible))
    if verdict.passed:
        print("pass: corpus delta matches the audited set")
        return 0
    print("fail: audit-world mismatch")
    for entry in verdict.unexplained_changes:
        print(f"  unexplained change: {entry.op} {entry.target} ({entry.kind})")
    for op, target in verdict.unmatched_executions:
        print(f"  unmatched execution: {op} {target}")
    tags = classify_failure(verdict)
    if tags:
        print(f"  failure shape: {', '.join(tags)}")
    return 2


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def _add_session_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--root", required=True, help="trust root JSON file")
    parser.add_argument("--operator-clearance", default="0::",
                        help="operator label, canonical text form")
    parser.add_argument("--skill", action="append", default=[],
                        help="skill package directory (repeatable)")
    parser.add_argument("--corpus", default=None, help="designated corpus root")
    parser.add_argument("--broker", default=None,
                        choices=["deny-all", "policy", "interactive", "webhook", "allow-all"],
                        help="broker kind (default: per profile)")
    parser.add_argument("--policy", default=None, help="policy document path")
    parser.add_argument("--timeout", type=float, default=DEFAULT_DECISION_TIMEOUT,
                        help="decision timeout seconds (default 60, deny on expiry)")
    parser.add_argument("--log", default=None, help="audit log path (JSONL)")
    parser.add_argument("--envelopes", default=None,
                        help="JSONL file of request envelopes to dispatch")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="skillgate")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate an Ed25519 keypair")
    p.add_argument("--key-id", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_keygen)

    root = sub.add_parser("root", help="trust root management")
    root_sub = root.add_subparsers(dest="root_command", required=True)
    p = root_sub.add_parser("add", help="add or replace a signer entry")
    p.add_argument("--root", required=True)
    p.add_argument("--key", required=True, help="keyfile from keygen")
    p.add_argument("--key-id", default=None)
    p.add_argument("--max-clearance", default="0::")
    p.add_argument("--max-level", default="declared")
    p.set_defaults(fn=cmd_root_add)
    p = root_sub.add_parser("lock", help="lock the root (no unlock exists)")
    p.add_argument("--root", required=True)
    p.set_defaults(fn=cmd_root_lock)
    p = root_sub.add_parser("show", help="print the root")
    p.add_argument("--root", required=True)
    p.set_defaults(fn=cmd_root_show)

    skill = sub.add_parser("skill", help="skill packaging")
    skill_sub = skill.add_subparsers(dest="skill_command", required=True)
    p = skill_sub.add_parser("sign", help="sign a skill package directory")
    p.add_argument("dir")
    p.add_argument("--key", required=True)
    p.add_argument("--skill-id", required=True)
    p.add_argument("--label", default="0::")
    p.add_argument("--cap", action="append", default=[],
                   help="capability declaration token:target (repeatable)")
    p.add_argument("--signer", default=None)
    p.add_argument("--version", type=int, default=1)
    p.add_argument("--verification", default=None,
                   help="unverified|declared|tested|formal (default unverified)")
    p.set_defaults(fn=cmd_skill_sign)
    p = skill_sub.add_parser("verify", help="run the admission checks on a package")
    p.add_argument("dir")
    p.add_argument("--root", required=True)
    p.add_argument("--operator-clearance", default="4::")
    p.add_argument("--max-rank", type=int, default=DEFAULT_MAX_RANK)
    p.set_defaults(fn=cmd_skill_verify)

    p = sub.add_parser("run", help="run a session over an envelope script")
    _add_session_args(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="run the approval API (and optional session driver)")
    _add_session_args(p)
    p.add_argument("--bind", default="127.0.0.1:8787")
    p.add_argument("--token", default=None, help="shared token for non-loopback binds")
    p.set_defaults(fn=cmd_serve)

    ensemble = sub.add_parser("ensemble", help="adversarial-ensemble harness")
    ens_sub = ensemble.add_subparsers(dest="ensemble_command", required=True)
    p = ens_sub.add_parser("trial", help="run one deterministic trial")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--scenario", default="clean", choices=list(SCENARIOS))
    p.add_argument("--broker", default="allow-all")
    p.add_argument("--workdir", default=None, help="keep trial artifacts here")
    p.add_argument("--log-out", default=None, help="write the audit log here")
    p.set_defaults(fn=cmd_ensemble_trial)
    p = ens_sub.add_parser("sweep", help="run the full grid")
    p.add_argument("--grid-n", default="10,50,200")
    p.add_argument("--grid-k", default="2,4,8")
    p.add_argument("--grid-r", default="5,10,25")
    p.add_argument("--seeds", type=int, default=200)
    p.add_argument("--scenarios", default=None, help="comma list (default all five)")
    p.add_argument("--broker", default="allow-all")
    p.add_argument("--out", default=None, help="CSV path (.gz compresses)")
    p.add_argument("--fig", default=None, help="figure path (default: CSV with .png)")
    p.add_argument("--no-fig", action="store_true")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(fn=cmd_ensemble_sweep)

    audit = sub.add_parser("audit", help="audit log tools")
    audit_sub = audit.add_subparsers(dest="audit_command", required=True)
    p = audit_sub.add_parser("verify", help="verify the hash chain")
    p.add_argument("log")
    p.set_defaults(fn=cmd_audit_verify)

    bicond = sub.add_parser("bicond", help="audit-world reconciliation")
    bicond_sub = bicond.add_subparsers(dest="bicond_command", required=True)
    p = bicond_sub.add_parser("snapshot", help="write a corpus baseline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_bicond_snapshot)
    p = bicond_sub.add_parser("check", help="check delta against the audited set")
    p.add_argument("--corpus", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--log", required=True)
    p.set_defaults(fn=cmd_bicond_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SkillGateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
