"""Command-line entry point.

Global flags may appear before or after the subcommand::

    pukcommit --seed 7 --out runs/responses response-map --mu-grid 1500 2650
    pukcommit bound-sweep --config setup.json --out runs/bound --n-keys 500

Exit codes: 0 success, 2 usage, 3 I/O, 4 invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ParameterError
from .experiments import (
    ExperimentError,
    ExperimentSpec,
    InvariantViolation,
    OutputError,
    UsageError,
    run,
    validate_config,
    write_json,
    write_manifest,
)
from .protocol import AnalyzerConfig, Commitment, commit, reveal_verify
from .seeding import substream
from .speckle import PukKey, gen_puk

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="root seed (unsigned 64-bit)")
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="AnalyzerConfig JSON file")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--replicates", type=int, default=argparse.SUPPRESS, help="independent replicates")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="pukcommit", parents=[common], description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-puk", parents=[common], help="draw a random key")
    p.add_argument("--n", type=int, help="output modes (default: config n)")
    p.add_argument("--N", type=int, help="input modes (default: config N)")

    p = sub.add_parser("commit", parents=[common], help="commit to a secret mode with a key")
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--secret", type=int, required=True)

    p = sub.add_parser("reveal", parents=[common], help="verify a claimed secret against a commitment")
    p.add_argument("--key", type=Path, required=True)
    p.add_argument("--commitment", type=Path, required=True)
    p.add_argument("--claimed", type=int, required=True)

    p = sub.add_parser("response-map", parents=[common], help="optimized vs random-mask responses")
    p.add_argument("--mu-grid", type=float, nargs="+")
    p.add_argument("--samples", type=int, help="detection outcomes per response")

    sub.add_parser("honest-run", parents=[common], help="honest commit/reveal sessions")
    sub.add_parser("cheat-single", parents=[common], help="false targets on the committed key")

    p = sub.add_parser("cheat-multi", parents=[common], help="false targets over fresh keys")
    p.add_argument("--n-keys", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("bound-sweep", parents=[common], help="cheating bound vs photon number")
    p.add_argument("--mu-grid", type=float, nargs="+")
    p.add_argument("--nu-list", type=int, nargs="+")
    p.add_argument("--empirical-mu", type=float, nargs="*")
    p.add_argument("--n-keys", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("stats-check", parents=[common], help="speckle, enhancement and concealing checks")
    p.add_argument("--keys", type=int)
    p.add_argument("--opt-keys", type=int)

    sub.add_parser("validate", parents=[common], help="check a configuration and print derived values")
    return parser


_OPTION_FLAGS = ("mu_grid", "samples", "n_keys", "trials", "nu_list", "empirical_mu", "keys", "opt_keys")


def _load_raw_config(args) -> dict:
    path = getattr(args, "config", None)
    if path is None:
        return AnalyzerConfig().to_dict()
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise OutputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc


def _load_config(args) -> AnalyzerConfig:
    try:
        return AnalyzerConfig.from_dict(_load_raw_config(args))
    except (ParameterError, TypeError) as exc:
        raise UsageError(f"invalid configuration: {exc}") from exc


def _load(loader, path):
    try:
        return loader(path)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise UsageError(f"malformed file {path}: {exc}") from exc


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out", "out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc}") from exc
    return out


def _spec_record(args, config: AnalyzerConfig, **extra) -> dict:
    return {"kind": args.command, "config": config.to_dict(), "seed": getattr(args, "seed", 0), **extra}


def _cmd_gen_puk(args) -> int:
    cfg = _load_config(args)
    seed = getattr(args, "seed", 0)
    n, N = args.n or cfg.n, args.N or cfg.setup.N
    try:
        key = gen_puk(n, N, cfg.setup.ell_over_L, substream(seed, 0), seed=seed)
    except ParameterError as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    try:
        key.save(out / "key.json")
    except OSError as exc:
        raise OutputError(str(exc)) from exc
    write_manifest(out, _spec_record(args, cfg, n=n, N=N), ["key.json"], {"key_fingerprint": key.fingerprint})
    print(out / "key.json")
    return EXIT_OK


def _cmd_commit(args) -> int:
    cfg = _load_config(args)
    key = _load(PukKey.load, args.key)
    try:
        c = commit(args.secret, key, cfg, substream(getattr(args, "seed", 0), 0))
    except (ParameterError, IndexError) as exc:
        raise UsageError(str(exc)) from exc
    out = _out_dir(args)
    try:
        c.save(out / "commitment.json")
    except OSError as exc:
        raise OutputError(str(exc)) from exc
    write_manifest(out, _spec_record(args, cfg, key=key.fingerprint), ["commitment.json"], {})
    print(out / "commitment.json")
    return EXIT_OK


def _cmd_reveal(args) -> int:
    cfg = _load_config(args)
    key = _load(PukKey.load, args.key)
    c = _load(Commitment.load, args.commitment)
    try:
        outcome = reveal_verify(c, args.claimed, key, cfg, substream(getattr(args, "seed", 0), 0))
    except ParameterError as exc:
        raise InvariantViolation(str(exc)) from exc
    out = _out_dir(args)
    write_json(out / "reveal.json", outcome.to_dict())
    write_manifest(out, _spec_record(args, cfg, claimed=args.claimed), ["reveal.json"], {"accepted": outcome.accepted})
    print(json.dumps({"accepted": outcome.accepted, "hits": outcome.hits,
                      "reason": None if outcome.reason is None else outcome.reason.value}))
    return EXIT_OK


def _cmd_validate(args) -> int:
    report = validate_config(_load_raw_config(args))
    text = json.dumps(report, indent=1, sort_keys=True)
    print(text)
    if hasattr(args, "out"):
        write_json(_out_dir(args) / "validate.json", report)
    return EXIT_OK if report["valid"] else EXIT_INVARIANT


def _cmd_experiment(args) -> int:
    options = {k: getattr(args, k) for k in _OPTION_FLAGS if getattr(args, k, None) is not None}
    spec = ExperimentSpec(
        kind=args.command,
        config=_load_config(args),
        seed=getattr(args, "seed", 0),
        replicates=getattr(args, "replicates", 1),
        output_path=getattr(args, "out", Path("out")),
        options=options,
    )
    manifest = run(spec)
    print(json.dumps(manifest["outputs"], indent=1))
    return EXIT_OK


_COMMANDS = {"gen-puk": _cmd_gen_puk, "commit": _cmd_commit, "reveal": _cmd_reveal, "validate": _cmd_validate}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS.get(args.command, _cmd_experiment)(args)
    except ExperimentError as exc:
        print(f"pukcommit: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
