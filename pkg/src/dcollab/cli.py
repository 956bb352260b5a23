"""Command-line front end.

Settings are resolved in three layers: package defaults, then flags,
then the config file, the last layer winning. Config files are flat
``key = value`` text whose keys mirror the run-configuration fields, so
one file can drive run, experiment, serve, and join identically. All
report CSVs get a PNG rendering of the same numbers next to them.
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import plots
from .audit import format_audit_report, simulate_share_audit
from .dataio import (
    load_csv,
    parse_schema_file,
    save_csv,
    synth_hospital,
    write_matrix_csv,
    write_schema_file,
)
from .errors import DcollabError, ParseError
from .matrixkit import RandomSource
from .netproto import run_worker, serve_master
from .pipeline import (
    MODES,
    RunConfig,
    Seeds,
    experiment,
    format_report_table,
    run,
    trial_split,
    write_report_csv,
)

_DEFAULTS = {
    "mode": "dc_proposed",
    "modes": MODES,
    "parties": 4,
    "party_size": 10,
    "party_sizes": None,
    "test_size": 20,
    "m_tilde": None,
    "m_hat": None,
    "c_mode": "sigma",
    "lambda_collab": 1.0,
    "lambda_local": 1.0,
    "r": 2000,
    "delta": 0.05,
    "anchor_rank": None,
    "permute": True,
    "trials": 20,
    "jobs": 1,
    "seed": None,
    "anchor_seed": None,
    "split_seed": None,
    "trial_seed": None,
    "data": None,
    "schema": None,
    "out_dir": ".",
    "map_kind": "proposed_randomized",
    "disclosed_fraction": 0.0,
    "distinctness_trials": 5,
    "sweep_parties": None,
    "session": "dc-session",
    "timeout": 60.0,
}

_INT_KEYS = {
    "parties", "party_size", "test_size", "m_tilde", "m_hat", "r",
    "anchor_rank", "trials", "jobs", "seed", "anchor_seed", "split_seed",
    "trial_seed", "distinctness_trials",
}
_FLOAT_KEYS = {"lambda_collab", "lambda_local", "delta", "disclosed_fraction", "timeout"}
_BOOL_KEYS = {"permute"}
_INT_TUPLE_KEYS = {"party_sizes", "sweep_parties"}
_STR_TUPLE_KEYS = {"modes"}


def _convert(key: str, value: str):
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _BOOL_KEYS:
        lowered = value.lower()
        if lowered not in ("true", "false"):
            raise ValueError(f"expected true/false, got {value!r}")
        return lowered == "true"
    if key in _INT_TUPLE_KEYS:
        return tuple(int(v) for v in value.split(",") if v.strip())
    if key in _STR_TUPLE_KEYS:
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


def parse_config_file(path) -> dict:
    """Flat key = value settings; keys mirror the flag names."""
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _DEFAULTS:
            raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            settings[key] = _convert(key, value)
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}")
    return settings


def _settings(args: argparse.Namespace) -> dict:
    """Defaults, overridden by flags, overridden by the config file."""
    s = dict(_DEFAULTS)
    for key in s:
        flag = getattr(args, key, None)
        if flag is not None:
            s[key] = flag
    if getattr(args, "no_permute", False):
        s["permute"] = False
    config_path = getattr(args, "config", None)
    if config_path:
        s.update(parse_config_file(config_path))
    return s


def _seeds(s: dict) -> Seeds:
    base = s["seed"]
    pick = lambda specific: specific if specific is not None else base
    return Seeds(
        anchor_seed=pick(s["anchor_seed"]),
        split_seed=pick(s["split_seed"]),
        trial_seed=pick(s["trial_seed"]),
    )


def _party_sizes(s: dict) -> tuple:
    if s["party_sizes"] is not None:
        return tuple(s["party_sizes"])
    return (s["party_size"],) * s["parties"]


def _run_config(s: dict, mode=None, party_sizes=None) -> RunConfig:
    return RunConfig(
        mode=mode if mode is not None else s["mode"],
        party_sizes=party_sizes if party_sizes is not None else _party_sizes(s),
        test_size=s["test_size"],
        m_tilde=s["m_tilde"],
        m_hat=s["m_hat"],
        c_mode=s["c_mode"],
        lambda_collab=s["lambda_collab"],
        lambda_local=s["lambda_local"],
        r=s["r"],
        delta=s["delta"],
        anchor_rank=s["anchor_rank"],
        permute=s["permute"],
        seeds=_seeds(s),
    )


def _synth_source(s: dict) -> RandomSource:
    if s["seed"] is not None:
        return RandomSource.seeded(s["seed"])
    return RandomSource.entropy()


def _load_dataset(s: dict, min_rows: int):
    if s["data"]:
        if not s["schema"]:
            raise ParseError("--schema is required alongside --data")
        D = load_csv(s["data"], parse_schema_file(s["schema"]))
        return D, Path(s["data"]).stem
    return synth_hospital(min_rows, _synth_source(s)), "hospital"


def _out_dir(s: dict) -> Path:
    out = Path(s["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_address(text: str):
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise ParseError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


# ------------------------------------------------------------ commands


def _cmd_synth(args) -> int:
    s = _settings(args)
    if args.kind != "hospital":
        raise ParseError(f"unknown synthetic kind {args.kind!r}")
    D = synth_hospital(args.n, _synth_source(s))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(D, out)
    write_schema_file(D.schema, out.with_suffix(".schema"))
    print(f"wrote {out} ({D.n} rows) and {out.with_suffix('.schema')}")
    return 0


def _cmd_split(args) -> int:
    s = _settings(args)
    config = _run_config(s)
    D, _name = _load_dataset(s, sum(config.party_sizes) + config.test_size)
    parties, X_test, y_test = trial_split(config, D)
    out = _out_dir(s)
    for i, party in enumerate(parties):
        save_csv(party, out / f"party_{i}.csv")
    test = type(D)(X_test, y_test.reshape(-1, 1), D.schema)
    save_csv(test, out / "test.csv")
    write_schema_file(D.schema, out / "split.schema")
    print(f"wrote {len(parties)} party files, test.csv, and split.schema to {out}")
    return 0


def _cmd_run(args) -> int:
    s = _settings(args)
    config = _run_config(s)
    D, name = _load_dataset(s, sum(config.party_sizes) + config.test_size)
    result = run(config, D)
    out = _out_dir(s)
    with (out / "report.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "dataset", "party", "auc"])
        for i, value in enumerate(result.auc):
            writer.writerow([result.mode, name, i, repr(value)])
    plots.render_party_bars(result.auc, out / "report.png",
                            title=f"{result.mode} on {name}")
    for i, value in enumerate(result.auc):
        print(f"party {i}: auc = {value:.4f}")
    print(f"wrote report.csv and report.png to {out}")
    return 0


def _sweep_rows(s: dict, D, name: str, counts, modes, trials: int, jobs: int):
    rows = []
    for c in counts:
        config = _run_config(s, party_sizes=(s["party_size"],) * c)
        report = experiment(config, D, trials=trials, modes=modes, jobs=jobs)
        for summary in report.summaries:
            rows.append((c, summary.mode, summary.mean_auc, summary.std_error))
    return rows


def _cmd_experiment(args) -> int:
    s = _settings(args)
    modes = tuple(s["modes"])
    trials, jobs = s["trials"], s["jobs"]
    out = _out_dir(s)
    if s["sweep_parties"]:
        counts = tuple(s["sweep_parties"])
        biggest = max(counts) * s["party_size"] + s["test_size"]
        D, name = _load_dataset(s, biggest)
        rows = _sweep_rows(s, D, name, counts, modes, trials, jobs)
        with (out / "auc_by_parties.csv").open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parties", "mode", "dataset", "trials", "mean_auc", "stderr"])
            for c, mode, mean, err in rows:
                writer.writerow([c, mode, name, trials, repr(mean), repr(err)])
        plots.render_party_sweep(rows, out / "auc_by_parties.png", title=name)
        for c, mode, mean, err in rows:
            print(f"parties={c} {mode}: {mean:.4f} +/- {err:.4f}")
        print(f"wrote auc_by_parties.csv and auc_by_parties.png to {out}")
        return 0
    config = _run_config(s)
    D, name = _load_dataset(s, sum(config.party_sizes) + config.test_size)
    report = experiment(config, D, trials=trials, modes=modes, jobs=jobs)
    write_report_csv(report, out / "report.csv", dataset=name)
    plots.render_mode_bars(report, out / "report.png", title=name)
    print(format_report_table(report))
    print(f"wrote report.csv and report.png to {out}")
    return 0


def _cmd_audit(args) -> int:
    s = _settings(args)
    min_rows = sum(_party_sizes(s)) + s["test_size"]
    D, name = _load_dataset(s, min_rows)
    m_tilde = s["m_tilde"]
    if m_tilde is None:
        m_tilde = max(1, min(D.m - 1, D.n - 1))
    src = RandomSource.seeded(s["seed"]) if s["seed"] is not None else RandomSource.entropy()
    report = simulate_share_audit(
        D.X, m_tilde, s["map_kind"], src,
        permute=s["permute"],
        disclosed_fraction=s["disclosed_fraction"],
        distinctness_trials=s["distinctness_trials"],
    )
    out = _out_dir(s)
    text = format_audit_report(report)
    (out / "audit.txt").write_text(text + "\n", encoding="utf-8")
    write_matrix_csv(report.correlation_matrix, out / "audit_correlation.csv")
    plots.render_correlation_heatmap(report.correlation_matrix,
                                     out / "audit_correlation.png", title=name)
    print(text)
    print(f"wrote audit.txt, audit_correlation.csv, and audit_correlation.png to {out}")
    return 0


def _cmd_serve(args) -> int:
    s = _settings(args)
    host, port = _parse_address(args.bind)
    config = _run_config(s, mode="dc_proposed")
    summary = serve_master(
        config,
        host=host,
        port=port,
        expected_parties=s["parties"],
        session_id=s["session"],
        timeout=s["timeout"],
        on_listening=lambda bound: print(f"listening on {bound[0]}:{bound[1]}", flush=True),
    )
    print(
        f"session {summary.session_id} done: {len(summary.parties)} parties, "
        f"anchor {summary.anchor_rows} rows, m_hat = {summary.m_hat}, "
        f"{summary.wall_time:.2f}s"
    )
    for warning in summary.warnings:
        print(f"warning: {warning}")
    return 0


def _cmd_join(args) -> int:
    s = _settings(args)
    host, port = _parse_address(args.master)
    if not s["data"] or not s["schema"]:
        raise ParseError("join needs --data and --schema for the local rows")
    D = load_csv(s["data"], parse_schema_file(s["schema"]))
    config = _run_config(s, mode="dc_proposed")
    outcome = run_worker(
        config, host, port, args.party_id, D.X, D.Y,
        session_id=s["session"], timeout=s["timeout"],
    )
    print(
        f"party {outcome.party_id}: distilled local model from "
        f"{outcome.Y_anc.shape[0]} anchor predictions"
    )
    return 0


# ------------------------------------------------------------- parsing


def _add_common(parser: argparse.ArgumentParser, with_data: bool = True) -> None:
    parser.add_argument("--config", help="flat key=value settings file; wins over flags")
    parser.add_argument("--seed", type=int, help="base seed for every random stream")
    parser.add_argument("--out-dir", dest="out_dir", help="directory for outputs")
    if with_data:
        parser.add_argument("--data", help="labeled CSV; synthetic data when omitted")
        parser.add_argument("--schema", help="schema file describing --data")


def _add_run_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--parties", type=int, help="number of parties")
    parser.add_argument("--party-size", dest="party_size", type=int,
                        help="rows per party when sizes are uniform")
    parser.add_argument("--party-sizes", dest="party_sizes",
                        type=lambda v: tuple(int(x) for x in v.split(",")),
                        help="comma-separated explicit party sizes")
    parser.add_argument("--test-size", dest="test_size", type=int)
    parser.add_argument("--m-tilde", dest="m_tilde", type=int,
                        help="intermediate dimension per party")
    parser.add_argument("--m-hat", dest="m_hat", type=int,
                        help="fused collaboration dimension")
    parser.add_argument("--c-mode", dest="c_mode", choices=("identity", "sigma"))
    parser.add_argument("--lambda-collab", dest="lambda_collab", type=float)
    parser.add_argument("--lambda-local", dest="lambda_local", type=float)
    parser.add_argument("--r", type=int, help="anchor rows")
    parser.add_argument("--delta", type=float, help="anchor noise scale")
    parser.add_argument("--anchor-rank", dest="anchor_rank", type=int)
    parser.add_argument("--no-permute", dest="no_permute", action="store_true",
                        help="skip the row permutation step")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcollab",
        description="privacy-preserving multi-party analysis toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p.add_argument("--kind", default="hospital", choices=("hospital",))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_common(p, with_data=False)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("split", help="partition a dataset into party files")
    _add_common(p)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("run", help="one analysis run, per-party AUC report")
    p.add_argument("--mode", choices=MODES)
    _add_common(p)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("experiment", help="paired multi-trial mode comparison")
    p.add_argument("--modes", type=lambda v: tuple(x.strip() for x in v.split(",")),
                   help="comma-separated analysis modes")
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, help="parallel trial workers")
    p.add_argument("--sweep-parties", dest="sweep_parties",
                   type=lambda v: tuple(int(x) for x in v.split(",")),
                   help="comma-separated party counts for a sweep")
    _add_common(p)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_experiment)

    p = sub.add_parser("audit", help="attack a simulated share and report")
    p.add_argument("--map-kind", dest="map_kind",
                   choices=("naive_pca", "proposed_randomized"))
    p.add_argument("--disclosed-fraction", dest="disclosed_fraction", type=float)
    p.add_argument("--distinctness-trials", dest="distinctness_trials", type=int)
    _add_common(p)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_audit)

    p = sub.add_parser("serve", help="host a networked session as master")
    p.add_argument("--bind", required=True, help="HOST:PORT to listen on")
    p.add_argument("--session", help="session identifier")
    p.add_argument("--timeout", type=float)
    _add_common(p, with_data=False)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("join", help="join a networked session as a worker")
    p.add_argument("--master", required=True, help="HOST:PORT of the master")
    p.add_argument("--party-id", dest="party_id", type=int, required=True)
    p.add_argument("--session", help="session identifier")
    p.add_argument("--timeout", type=float)
    _add_common(p)
    _add_run_config(p)
    p.set_defaults(handler=_cmd_join)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except (DcollabError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
