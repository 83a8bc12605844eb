"""Command-line experiments and protocol demos.

Every subcommand is seeded and writes CSV (or JSON) files into ``--out``
with a ``# config`` comment line, then prints a short summary to stdout.
Exit codes: 0 success, 1 signature rejected, 2 invalid configuration,
3 protocol abort, 4 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, circuits, encoding, runtime, signature
from .errors import InvalidArgument, ParseError, ProtocolAbort, ResourceLimitError

log = logging.getLogger("potp")

EXIT_OK, EXIT_REJECTED, EXIT_CONFIG, EXIT_ABORT, EXIT_RESOURCE = 0, 1, 2, 3, 4
DEFAULT_DEVIATIONS = ("1101", "0001", "0111", "0100")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    trials: int = 10_000
    scheme: str = "linear"
    fidelity: float = 1.0
    loss: float = 0.0
    copies: int = 1
    rows: int = signature.HASH_BITS
    big_t: int = 300
    tau: int = 234
    out: str = "out"

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        if not 0 < self.fidelity <= 1:
            raise InvalidArgument("fidelity must lie in (0, 1]")
        if not 0 <= self.loss < 1:
            raise InvalidArgument("loss must lie in [0, 1)")
        if self.copies < 1:
            raise InvalidArgument("copies must be >= 1")
        if not 1 <= self.rows <= signature.HASH_BITS:
            raise InvalidArgument(f"rows must lie in [1, {signature.HASH_BITS}]")
        if self.big_t < 1 or not 0 <= self.tau <= self.big_t:
            raise InvalidArgument("need T >= 1 and 0 <= tau <= T")
        encoding.Scheme(self.scheme)

    @property
    def out_dir(self) -> Path:
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p


def write_csv(path: Path, cfg: ExperimentConfig, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as f:
        f.write(f"# config: {json.dumps(dataclasses.asdict(cfg), sort_keys=True)}\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    return path


def _stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n else float("nan")


def _rng(cfg: ExperimentConfig, *key: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *key])


# --------------------------------------------------------------------------
# subcommands


def cmd_gates(cfg: ExperimentConfig, args) -> int:
    schemes = [cfg.scheme] if args.only_scheme else ["linear", "elliptical"]
    rows = []
    for si, scheme in enumerate(schemes):
        for table in encoding.all_tables(2):
            exact = encoding.success_probability(scheme, table, cfg.fidelity)
            for x in range(4):
                bits = encoding.input_bits(x, 2)
                rng = _rng(cfg, si, int(table.label, 2), x)
                out = encoding.sample_outputs(scheme, table, bits, cfg.trials, rng, cfg.fidelity)
                p = float(np.mean(out == table(bits)))
                rows.append((scheme, table.label, "".join(map(str, bits)), cfg.trials, p,
                             float(exact[x]), _stderr(p, cfg.trials)))
    path = write_csv(cfg.out_dir / "gates.csv", cfg,
                     ["scheme", "table", "input", "trials", "empirical", "exact", "stderr"], rows)
    worst = max(abs(r[4] - r[5]) / r[6] for r in rows if r[6] > 0)
    print(f"{len(rows)} cells -> {path}; largest deviation {worst:.2f} sigma")
    return EXIT_OK


def cmd_millionaires(cfg: ExperimentConfig, args) -> int:
    alice = args.alice
    bobs = args.bob or list(DEFAULT_DEVIATIONS)
    if any(len(b) != len(alice) for b in bobs):
        raise InvalidArgument("Alice's and Bob's numbers must have equal widths")
    program = circuits.compile_millionaires(alice)
    p_line = encoding.line_success(2)
    rows = []
    for i, b in enumerate(bobs):
        inputs = circuits.bob_inputs(b)
        truth = int(int(b, 2) > int(alice, 2))
        pred = circuits.predict_success(program, inputs, p_line)["gt"]
        stats = runtime.run_sessions(program, inputs, cfg.trials, cfg.seed * 1000 + i, cfg.loss,
                                     cfg.copies, cfg.scheme, cfg.fidelity)
        emp = stats.frequency("gt", truth) if stats.completed else float("nan")
        rows.append((alice, b, truth, stats.trials, stats.aborted, emp, pred,
                     _stderr(emp, stats.completed), stats.gate_abort_rate))
        print(f"bob={b} truth={truth} empirical={emp:.4f} predicted={pred:.5f} aborted={stats.aborted}")
    write_csv(cfg.out_dir / "millionaires.csv", cfg,
              ["alice", "bob", "truth", "sessions", "aborted", "empirical", "predicted", "stderr",
               "gate_abort_rate"], rows)
    return EXIT_OK


def _bundle_json(b: signature.SignatureBundle) -> dict:
    return {"fidelity": b.fidelity, "tables": ["".join(map(str, r)) for r in b.tables.tolist()]}


def cmd_sign(cfg: ExperimentConfig, args) -> int:
    message = Path(args.message).read_bytes()
    rng = _rng(cfg)
    bundle = signature.SignatureBundle.generate(rng, cfg.rows, cfg.big_t, cfg.fidelity)
    record = bundle.record()
    rows = signature.sign(bundle, message, rng)
    out = cfg.out_dir
    (out / "record.json").write_text(json.dumps(_bundle_json(record)))
    (out / "signature.json").write_text(json.dumps(
        {"rows": [{"hash_bit": r.hash_bit, "outputs": "".join(map(str, r.outputs.tolist()))} for r in rows]}))
    report = signature.verify(record, message, rows, cfg.tau)
    print(f"signed {len(rows)} rows x {cfg.big_t}; min match {report.min_match}; "
          f"passes tau={cfg.tau}: {report.passed}")
    return EXIT_OK


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    message = Path(args.message).read_bytes()
    try:
        rec = json.loads(Path(args.record).read_text())
        sig = json.loads(Path(args.signature).read_text())
        tables = np.array([[int(c) for c in r] for r in rec["tables"]], dtype=np.int8)
        record = signature.SignatureBundle(tables, rec.get("fidelity", 1.0))
        rows = [signature.SignatureRow(int(r["hash_bit"]), np.array([int(c) for c in r["outputs"]], dtype=np.int8))
                for r in sig["rows"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgument(f"malformed record or signature file: {exc}") from exc
    report = signature.verify(record, message, rows, cfg.tau)
    print(f"min match {report.min_match} over {len(rows)} rows; tau={cfg.tau}; "
          f"{'ACCEPT' if report.passed else 'REJECT'}")
    return EXIT_OK if report.passed else EXIT_REJECTED


def cmd_sig_curves(cfg: ExperimentConfig, args) -> int:
    p = 0.5 + 0.5 * cfg.fidelity / math.sqrt(2)
    curve = signature.threshold_sweep(cfg.big_t, cfg.rows, p, single_row=args.single_row)
    write_csv(cfg.out_dir / "sig_curves.csv", cfg, ["tau", "honest", "dishonest", "difference"],
              [(s.tau, s.honest, s.dishonest, s.difference) for s in curve])
    best = signature.best_threshold(curve)
    rng = _rng(cfg)
    matches, passes = [], 0
    for _ in range(cfg.trials):
        b = signature.SignatureBundle.generate(rng, cfg.rows, cfg.big_t, cfg.fidelity)
        rec = b.record()
        msg = rng.bytes(16)
        rep = signature.verify(rec, msg, signature.sign(b, msg, rng), cfg.tau)
        matches.extend(rep.matches.tolist())
        passes += rep.passed
    hist = signature.match_histogram(matches, cfg.big_t, p)
    write_csv(cfg.out_dir / "sig_histogram.csv", cfg, ["bin_start", "count", "expected"],
              [h for h in hist if h[1] or h[2] >= 1e-3])
    exact = signature.honest_pass_probability(cfg.big_t, cfg.tau, p, cfg.rows)
    print(f"best tau {best.tau} (difference {best.difference:.4f}); "
          f"pass rate {passes}/{cfg.trials} vs exact {exact:.4f} at tau={cfg.tau}")
    return EXIT_OK


def cmd_bounds(cfg: ExperimentConfig, args) -> int:
    out = cfg.out_dir
    viol = []
    for c in (1, 3, 5):
        lp = analysis.quantum_line_and_parity(c)
        viol.append((c, lp.f1, lp.f2, lp.classical_floor, lp.violated, lp.f1_closed, lp.f2_closed))
    write_csv(out / "inequality.csv", cfg, ["copies", "F1Q", "F2Q", "classical_floor", "violated",
                                            "F1Q_closed", "F2Q_closed"], viol)
    trade = []
    for k, copies in ((1, (1, 3, 5)), (2, (1, 3))):
        for t in analysis.tradeoff_curve(k, copies):
            trade.append((k, t.copies, t.p1, t.p1_tilde, t.p1))
    write_csv(out / "tradeoff.csv", cfg, ["k", "copies", "P1", "P1_tilde", "classical_P1_tilde"], trade)
    report = []
    for k in (1, 2):
        for c in (1, 2, 3):
            _, states = analysis.gate_ensemble(k, c)
            povm = analysis.pgm(states)
            cert = analysis.certify_optimal(povm, states)
            report.append({"k": k, "copies": c, "optimal": cert.optimal, "condition": cert.condition,
                           "success": povm.success(states)})
    (out / "certification.json").write_text(json.dumps(report, indent=2))
    fid = [(t.label, analysis.two_copy_from_single_query(t)) for t in encoding.all_tables(1)]
    write_csv(out / "two_copy.csv", cfg, ["table", "fidelity"], fid)
    for r in viol:
        print(f"c={r[0]}: F1Q={r[1]:.4f} F2Q={r[2]:.4f} floor={r[3]:.4f} violated={r[4]}")
    print(f"PGM optimal in all {len(report)} configurations: {all(r['optimal'] for r in report)}")
    print("two-copy fidelities: " + ", ".join(f"{lab}={f:.12f}" for lab, f in fid))
    return EXIT_OK


def _alice_for(cfg: ExperimentConfig, alice_bits: str) -> runtime.Alice:
    channel = runtime.ChannelConfig(cfg.loss, cfg.copies, cfg.seed)
    return runtime.Alice(circuits.compile_millionaires(alice_bits), np.random.default_rng(cfg.seed),
                         channel, cfg.scheme, cfg.fidelity)


def cmd_serve(cfg: ExperimentConfig, args) -> int:
    alice = _alice_for(cfg, args.alice)

    def ready(port):
        print(f"listening on {args.host}:{port}", flush=True)

    runtime.serve_tcp(alice, args.host, args.port, ready)
    return EXIT_OK


def cmd_connect(cfg: ExperimentConfig, args) -> int:
    bob = runtime.Bob(circuits.bob_inputs(args.bob))
    t = runtime.connect_tcp(bob, args.host, args.port)
    path = cfg.out_dir / "transcript.json"
    path.write_text(t.to_json())
    if t.aborted:
        print(f"session aborted: {t.abort_reason}")
        return EXIT_ABORT
    print(f"outputs {t.outputs}; transcript -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=None)
    common.add_argument("--scheme", choices=["linear", "elliptical", "general"], default="linear")
    common.add_argument("--fidelity", type=float, default=1.0)
    common.add_argument("--loss", type=float, default=0.0)
    common.add_argument("--copies", type=int, default=None)
    common.add_argument("--rows", type=int, default=signature.HASH_BITS)
    common.add_argument("--big-t", type=int, default=300)
    common.add_argument("--tau", type=int, default=234)
    common.add_argument("--out", default="out")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="potp", description="Gate one-time-program experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gates", parents=[common], help="per-line success of every two-input gate")
    s.add_argument("--only-scheme", action="store_true", help="run only --scheme instead of both")
    s.set_defaults(func=cmd_gates)

    s = sub.add_parser("millionaires", parents=[common], help="comparator sessions")
    s.add_argument("--alice", default="0101")
    s.add_argument("--bob", action="append", help="Bob's number (repeatable); defaults to one-bit deviations")
    s.set_defaults(func=cmd_millionaires)

    s = sub.add_parser("sign", parents=[common], help="generate a bundle and sign a message file")
    s.add_argument("message")
    s.set_defaults(func=cmd_sign)

    s = sub.add_parser("verify", parents=[common], help="verify a signature against a record")
    s.add_argument("message")
    s.add_argument("--record", required=True)
    s.add_argument("--signature", required=True)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("sig-curves", parents=[common], help="threshold sweep and match histogram")
    s.add_argument("--single-row", action="store_true")
    s.set_defaults(func=cmd_sig_curves)

    s = sub.add_parser("bounds", parents=[common], help="inequality, tradeoff, certification, two-copy")
    s.set_defaults(func=cmd_bounds)

    for name, func in (("serve", cmd_serve), ("connect", cmd_connect)):
        s = sub.add_parser(name, parents=[common], help=f"{name} one session over TCP")
        s.add_argument("--host", default="127.0.0.1")
        s.add_argument("--port", type=int, default=0 if name == "serve" else None, required=name == "connect")
        if name == "serve":
            s.add_argument("--alice", default="0101")
        else:
            s.add_argument("--bob", default="0111")
        s.set_defaults(func=func)
    return p


_DEFAULT_TRIALS = {"gates": 10_000, "millionaires": 10_000, "sig-curves": 50}


def config_from_args(args) -> ExperimentConfig:
    trials = args.trials if args.trials is not None else _DEFAULT_TRIALS.get(args.command, 1)
    copies = args.copies if args.copies is not None else (8 if args.loss > 0 else 1)
    return ExperimentConfig(args.seed, trials, args.scheme, args.fidelity, args.loss, copies,
                            args.rows, args.big_t, args.tau, args.out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = config_from_args(args)
        return args.func(cfg, args)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ProtocolAbort, ParseError, ConnectionError) as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (InvalidArgument, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
