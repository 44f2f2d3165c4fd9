"""Command-line front end.

Subcommands::

    heibo run       one optimization, writes a CSV trace
    heibo suite     replicated benchmark, writes a per-iteration gap table
    heibo functions list the built-in test functions
    heibo ratio     stability log-ratios from a saved trace

Configuration files hold flat ``key = value`` lines; ``#`` starts a comment.
Command-line flags override file values and ``HEI_SEED`` overrides the file's
seed.  Exit codes: 0 success, 2 configuration error, 3 objective failure,
4 too many failed replications in a suite.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import queue
import shlex
import subprocess
import sys
import threading
from typing import Optional

import numpy as np

from .bench import FUNCTIONS, get_function, run_suite
from .design import Domain
from .driver import METHOD_NAMES, ObjectiveError, RunTrace, make_config, run_bo
from .kernel import FAMILIES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_OBJECTIVE = 3
EXIT_SUITE = 4

DEFAULT_TIMEOUT = 600.0


class ConfigError(ValueError):
    pass


class ExternalObjective:
    """Black-box objective served by a persistent child process.

    Each evaluation writes one line of ``d`` space-separated numbers to the
    child's stdin and reads one line holding ``f(x)`` from its stdout.  The
    child is started on first use, so an unstarted handle can be copied into
    worker processes; each copy owns its own child.
    """

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT):
        self.command = command
        self.timeout = float(timeout)
        self._proc = None
        self._lines = None

    def __getstate__(self):
        return {"command": self.command, "timeout": self.timeout}

    def __setstate__(self, state):
        self.__init__(state["command"], state["timeout"])

    def _start(self):
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ObjectiveError(f"cannot start objective {self.command!r}: {exc}") from exc
        self._lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()

    @staticmethod
    def _pump(stream, q):
        for line in stream:
            q.put(line)
        q.put(None)

    def __call__(self, x) -> float:
        if self._proc is None:
            self._start()
        line = " ".join(repr(float(v)) for v in np.atleast_1d(x)) + "\n"
        try:
            self._proc.stdin.write(line)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ObjectiveError(f"objective process closed its input: {exc}") from exc
        try:
            reply = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            self.close()
            raise ObjectiveError(f"objective did not answer within {self.timeout:g} s") from None
        if reply is None:
            raise ObjectiveError("objective process exited")
        try:
            value = float(reply.strip())
        except ValueError:
            raise ObjectiveError(f"non-numeric reply from objective: {reply.strip()!r}") from None
        if not math.isfinite(value):
            raise ObjectiveError(f"non-finite reply from objective: {reply.strip()!r}")
        return value

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------------------
# configuration

_RUN_KEYS = {
    "function": str,
    "command": str,
    "lower": str,
    "upper": str,
    "f_min": float,
    "method": str,
    "n_ini": int,
    "n_tot": int,
    "seed": int,
    "family": str,
    "trend": str,
    "theta_lo": float,
    "theta_hi": float,
    "nugget": float,
    "timeout": float,
    "output": str,
    "run_id": str,
}
_SUITE_KEYS = dict(_RUN_KEYS, methods=str, replications=int, workers=int)
_SUITE_KEYS.pop("method")
_SUITE_KEYS.pop("run_id")


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines, dropping comments and blank lines."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    out = {}
    for k, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{k}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{k}: empty key")
        out[key] = value
    return out


def _coerce(raw: dict, schema: dict) -> dict:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, value in raw.items():
        try:
            out[key] = schema[key](value)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key!r}: {value!r}") from None
    return out


def _vector(text: str, name: str):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad {name} bounds: {text!r}") from None


def merge_settings(args, schema: dict) -> dict:
    raw = read_config(args.config) if args.config else {}
    settings = _coerce(raw, schema)
    env_seed = os.environ.get("HEI_SEED")
    if env_seed is not None and "seed" in schema:
        try:
            settings["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"HEI_SEED must be an integer, got {env_seed!r}") from None
    for key in schema:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _problem(settings: dict):
    """Domain, objective factory and reference minimum from validated settings."""
    fn, cmd = settings.get("function"), settings.get("command")
    if bool(fn) == bool(cmd):
        raise ConfigError("give exactly one of 'function' or 'command'")
    timeout = settings.get("timeout", DEFAULT_TIMEOUT)
    if not timeout > 0:
        raise ConfigError("timeout must be positive")
    if fn:
        try:
            tf = get_function(fn)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if "lower" in settings or "upper" in settings:
            raise ConfigError("built-in functions use their own domain; drop lower/upper")
        return tf.domain, (lambda: tf), settings.get("f_min", tf.f_min)
    if "lower" not in settings or "upper" not in settings:
        raise ConfigError("an external command needs 'lower' and 'upper' bounds")
    try:
        domain = Domain(_vector(settings["lower"], "lower"), _vector(settings["upper"], "upper"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return domain, (lambda: ExternalObjective(cmd, timeout)), settings.get("f_min", math.nan)


def _run_kwargs(settings: dict) -> dict:
    kw = {}
    for key in ("n_ini", "n_tot", "seed"):
        if key in settings:
            kw[key] = settings[key]
    if "family" in settings:
        fam = settings["family"].lower()
        if fam not in FAMILIES:
            raise ConfigError(f"unknown kernel family {fam!r}; expected one of {FAMILIES}")
        kw["family"] = fam
    if "trend" in settings:
        t = settings["trend"].lower()
        if t != "bic":
            try:
                t = int(t)
            except ValueError:
                raise ConfigError(f"trend must be 'bic' or an integer order, got {t!r}") from None
            if t < 0:
                raise ConfigError("trend order must be nonnegative")
        kw["trend"] = t
    if "theta_lo" in settings or "theta_hi" in settings:
        kw["theta_bounds"] = (settings.get("theta_lo", 1e-2), settings.get("theta_hi", 100.0))
    if "nugget" in settings:
        kw["nugget"] = settings["nugget"]
    return kw


def _method(name: str) -> str:
    name = name.strip().upper()
    if name not in METHOD_NAMES:
        raise ConfigError(f"unknown method {name!r}; expected one of {', '.join(METHOD_NAMES)}")
    return name


# ---------------------------------------------------------------------------
# output


def _num(v) -> str:
    return repr(float(v))


def trace_header(d: int) -> list:
    return (
        ["run_id", "method", "iteration"]
        + [f"x_{i + 1}" for i in range(d)]
        + ["y", "best_y", "gap", "s_next", "s_max_est", "a", "b"]
        + [f"theta_{i + 1}" for i in range(d)]
    )


def trace_rows(trace: RunTrace, run_id: str, f_min: float):
    d = trace.d
    for r in trace.records:
        theta = r.theta if r.theta is not None else np.full(d, np.nan)
        yield (
            [run_id, trace.method, str(r.iteration)]
            + [_num(v) for v in r.x]
            + [_num(r.y), _num(r.best_y), _num(r.best_y - f_min)]
            + [_num(r.s_next), _num(r.s_max_est), _num(r.a), _num(r.b)]
            + [_num(v) for v in theta]
        )


def write_trace(path: str, trace: RunTrace, run_id: str, f_min: float):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_header(trace.d))
    w.writerows(trace_rows(trace, run_id, f_min))
    _write_text(path, buf.getvalue())


def write_gap_table(path: str, table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["method", "iteration", "replications", "mean_gap", "median_gap", "mean_log10_gap", "median_log10_gap"]
    w.writerow(cols)
    for row in table.rows():
        w.writerow([row["method"], str(row["iteration"]), str(row["replications"])] + [_num(row[c]) for c in cols[3:]])
    _write_text(path, buf.getvalue())


def _write_text(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    try:
        settings = merge_settings(args, _RUN_KEYS)
        domain, make_objective, f_min = _problem(settings)
        method = _method(settings.get("method", "HEI_DSD"))
        kw = _run_kwargs(settings)
        # validate the full config with a placeholder objective before anything runs
        make_config(method, domain, None, **kw)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    output = settings.get("output", "trace.csv")
    run_id = settings.get("run_id", f"{method.lower()}-{kw.get('seed', 0)}")
    objective = make_objective()
    try:
        trace = run_bo(make_config(method, domain, objective, **kw))
    except ObjectiveError as exc:
        if exc.trace is not None and len(exc.trace):
            write_trace(output, exc.trace, run_id, f_min)
        print(f"objective failure: {exc}", file=sys.stderr)
        return EXIT_OBJECTIVE
    finally:
        if hasattr(objective, "close"):
            objective.close()
    write_trace(output, trace, run_id, f_min)
    return EXIT_OK


def cmd_suite(args) -> int:
    try:
        settings = merge_settings(args, _SUITE_KEYS)
        domain, make_objective, f_min = _problem(settings)
        methods = [m for m in settings.get("methods", "").replace(",", " ").split() if m]
        if not methods:
            raise ConfigError("empty method list")
        methods = [_method(m) for m in methods]
        if len(set(methods)) != len(methods):
            raise ConfigError("duplicate methods")
        if not math.isfinite(f_min):
            raise ConfigError("suites over an external command need 'f_min'")
        reps = settings.get("replications", 20)
        if reps < 1:
            raise ConfigError("replications must be positive")
        workers = settings.get("workers", os.cpu_count() or 1)
        if workers < 1:
            raise ConfigError("workers must be positive")
        kw = _run_kwargs(settings)
        base_seed = kw.pop("seed", 0)
        configs = {m: make_config(m, domain, make_objective(), **kw) for m in methods}
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    table = run_suite(configs, reps, f_min, base_seed=base_seed, workers=workers)
    write_gap_table(settings.get("output", "gaps.csv"), table)
    status = EXIT_OK
    for m in methods:
        failed = [s for s in table.status[m] if s != "ok"]
        for s in failed:
            print(f"{m}: {s}", file=sys.stderr)
        if 2 * len(failed) > reps:
            status = EXIT_SUITE
    return status


def cmd_functions(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["name", "d", "lower", "upper", "f_min", "f_min_provenance"])
    for name, tf in FUNCTIONS.items():
        w.writerow([name, tf.d, " ".join(map(repr, tf.domain.lower)), " ".join(map(repr, tf.domain.upper)), _num(tf.f_min), tf.f_min_provenance])
    return EXIT_OK


def read_trace(path: str):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"s_next", "s_max_est", "iteration", "run_id"} <= set(rows[0]):
        raise ValueError("trace is missing stability columns")
    return rows


def cmd_ratio(args) -> int:
    try:
        rows = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "iteration", "log_ratio"])
    for r in rows:
        s, smax = float(r["s_next"]), float(r["s_max_est"])
        if not (math.isfinite(s) and math.isfinite(smax)):
            continue
        ratio = math.log(s / smax) if s > 0 else -math.inf
        w.writerow([r["run_id"], r["iteration"], _num(ratio)])
    _write_text(args.output or "-", buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common(p):
    p.add_argument("--config", "-c", help="key = value configuration file")
    p.add_argument("--function", help=f"built-in objective: {', '.join(FUNCTIONS)}")
    p.add_argument("--command", help="external objective command line")
    p.add_argument("--lower", help="lower bounds for an external objective")
    p.add_argument("--upper", help="upper bounds for an external objective")
    p.add_argument("--f-min", dest="f_min", type=float, help="reference minimum used for the gap")
    p.add_argument("--n-ini", dest="n_ini", type=int)
    p.add_argument("--n-tot", dest="n_tot", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--family", help=f"kernel: {', '.join(FAMILIES)}")
    p.add_argument("--trend", help="'bic' or a polynomial order")
    p.add_argument("--theta-lo", dest="theta_lo", type=float)
    p.add_argument("--theta-hi", dest="theta_hi", type=float)
    p.add_argument("--nugget", type=float)
    p.add_argument("--timeout", type=float, help="seconds per external evaluation")
    p.add_argument("--output", "-o")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heibo", description="Hierarchical expected improvement optimization")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one optimization and write its trace")
    _common(p)
    p.add_argument("--method", help=", ".join(METHOD_NAMES))
    p.add_argument("--run-id", dest="run_id")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="replicated benchmark, writes a gap table")
    _common(p)
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("functions", help="list built-in test functions")
    p.set_defaults(func=cmd_functions)

    p = sub.add_parser("ratio", help="stability log-ratios from a trace file")
    p.add_argument("trace")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_ratio)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
