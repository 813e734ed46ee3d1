"""Command-line front end.

Every subcommand reads its machine from a stage name (built from the
parameters) or from a machine JSON file, and writes JSON with sorted keys so
that the same inputs give byte-identical output.

Exit codes: 0 ok, 1 malformed input, 2 precondition failure, 3 bounded
search ended without acceptance, 4 verification failure.
"""

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction

from .computation import Computation, RunError, StepHistoryError, accept_search, one_machine_index, run, step_history
from .diagram import (DiagramError, check_no_annuli, hub_rings, diagram_from_json, diagram_weight, disk_diagram,
                      maximal_bands, path_length, power_relator_diagram, presentation_for, signature,
                      trapezium_from_computation, area)
from .hardware import AdmissibilityError, HardwareError, dumps, parse_admissible
from .machines import (MachineError, Params, Tower, accept_history, accept_input, base_input_config,
                       build_tower, machine_from_json, make_primitive, parse_word, standard_config)
from .presentation import PresentationError, UnsupportedExponent, emit_presentation
from .rules import RuleError

SCHEMA = "smforge.config/1"

OK, MALFORMED, PRECONDITION, EXHAUSTED, FAILED = 0, 1, 2, 3, 4

DEFAULTS = {
    "params": {"n": 3, "k": 2, "L": 4, "delta": 0.01, "c7": 1.0},
    "base": "power_checker",
    "stage": "m",
    "limits": {"max_depth": 50, "max_states": 200000, "max_alen": None},
    "output": None,
    "suite": "all",
}

STAGES = Tower.STAGES + ("lr", "rl")

# start configuration used by `accept --word w` when no --form is given
DEFAULT_FORM = {"M": "I", "M61": "I6", "M62": "I6", "M5": "I5"}


class CliError(Exception):
    def __init__(self, code, msg):
        super().__init__(msg)
        self.code = code


class BuildConfig:
    """Parameters, base machine, stage, limits, output path and suite; file
    values first, then command-line flags."""

    def __init__(self, data=None):
        data = data or {}
        if data.get("schema", SCHEMA) != SCHEMA:
            raise CliError(MALFORMED, f"unknown config schema {data.get('schema')!r}")
        unknown = set(data) - set(DEFAULTS) - {"schema"}
        if unknown:
            raise CliError(MALFORMED, f"unknown config keys {sorted(unknown)}")
        self.params = dict(DEFAULTS["params"], **data.get("params", {}))
        self.limits = dict(DEFAULTS["limits"], **data.get("limits", {}))
        self.base = data.get("base", DEFAULTS["base"])
        self.stage = data.get("stage", DEFAULTS["stage"])
        self.output = data.get("output", DEFAULTS["output"])
        self.suite = data.get("suite", DEFAULTS["suite"])

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(MALFORMED, f"cannot read config {path}: {e}") from None
        if not isinstance(data, dict):
            raise CliError(MALFORMED, "config must be a JSON object")
        return cls(data)

    def override(self, args):
        for key in ("n", "k", "L", "delta", "c7"):
            v = getattr(args, key, None)
            if v is not None:
                self.params[key] = v
        for key in ("max_depth", "max_states", "max_alen"):
            v = getattr(args, key, None)
            if v is not None:
                self.limits[key] = v
        for key in ("base", "stage", "suite"):
            v = getattr(args, key, None)
            if v is not None:
                setattr(self, key, v)
        if getattr(args, "out", None) is not None:
            self.output = args.out
        self.check()
        return self

    def check(self):
        try:
            self.params_obj = Params(**self.params)
        except (TypeError, MachineError) as e:
            raise CliError(MALFORMED, f"bad parameters: {e}") from None
        for key, v in self.limits.items():
            if v is not None and (not isinstance(v, int) or v <= 0):
                raise CliError(MALFORMED, f"limit {key} must be a positive integer")
        if self.stage.lower() not in STAGES:
            raise CliError(MALFORMED, f"unknown stage {self.stage}; one of {', '.join(STAGES)}")

    def to_json(self):
        return {"schema": SCHEMA, "params": self.params, "base": self.base, "stage": self.stage,
                "limits": self.limits, "output": self.output, "suite": self.suite}


def seed_from_env():
    v = os.environ.get("SMFORGE_SEED")
    if v in (None, ""):
        return None
    try:
        return int(v)
    except ValueError:
        raise CliError(MALFORMED, f"SMFORGE_SEED must be an integer, got {v!r}") from None


# ---------------------------------------------------------------------------
# inputs

def load_machine(cfg, args):
    if getattr(args, "machine", None):
        data = read_json(args.machine)
        try:
            return machine_from_json(data)
        except (KeyError, TypeError, HardwareError, RuleError, MachineError) as e:
            raise CliError(MALFORMED, f"bad machine file: {e}") from None
    st = cfg.stage.lower()
    p = cfg.params_obj
    try:
        if st in ("lr", "rl"):
            return make_primitive(st.upper(), k=p.k)
        if cfg.base not in ("power_checker", "free_checker"):
            raise CliError(MALFORMED, f"unknown base machine {cfg.base}")
        return build_tower(p, cfg.base).stage(st)
    except MachineError as e:
        raise CliError(PRECONDITION, str(e)) from None


def read_text(path):
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path) as f:
            return f.read()
    except OSError as e:
        raise CliError(MALFORMED, f"cannot read {path}: {e}") from None


def read_json(path):
    try:
        return json.loads(read_text(path))
    except json.JSONDecodeError as e:
        raise CliError(MALFORMED, f"{path} is not JSON: {e}") from None


def parse_config_word(M, text):
    try:
        return parse_admissible(text, M.hardware)
    except (AdmissibilityError, HardwareError, KeyError) as e:
        raise CliError(MALFORMED, f"not an admissible word: {e}") from None


def load_computation(M, path):
    d = read_json(path)
    if not isinstance(d, dict) or "start" not in d or "history" not in d:
        raise CliError(MALFORMED, "computation file needs 'start' and 'history'")
    if d.get("machine") not in (None, M.name):
        raise CliError(PRECONDITION, f"computation is over {d['machine']}, not {M.name}")
    W = parse_config_word(M, d["start"])
    try:
        hist = M.history(d["history"])
    except MachineError as e:
        raise CliError(MALFORMED, str(e)) from None
    return W, hist


def start_word(M, args):
    """Start configuration from --start tokens or from --word with --form."""
    if args.start:
        return parse_config_word(M, args.start)
    if args.word is None:
        raise CliError(MALFORMED, "give --start or --word")
    try:
        if M.meta.get("kind") in ("power_checker", "free_checker") and not args.form:
            return base_input_config(M, parse_word(args.word, tuple(M.meta["letters"])))
        form = args.form or DEFAULT_FORM.get(M.meta.get("stage"))
        if form is None:
            raise CliError(PRECONDITION, f"give --form or --start for {M.name}")
        return standard_config(M, form, args.word)
    except MachineError as e:
        raise CliError(PRECONDITION, str(e)) from None


def load_diagram(M, path):
    d = read_json(path)
    if not isinstance(d, dict) or "edges" not in d or "cells" not in d:
        raise CliError(MALFORMED, "diagram file needs 'edges' and 'cells'")
    if d.get("machine") not in (None, M.name):
        raise CliError(PRECONDITION, f"diagram is over {d['machine']}, not {M.name}")
    try:
        return diagram_from_json(d, presentation_for(M)).finalize()
    except (KeyError, TypeError, IndexError, DiagramError, PresentationError) as e:
        raise CliError(MALFORMED, f"bad diagram file: {e}") from None


def emit(cfg, text):
    if not text.endswith("\n"):
        text += "\n"
    if cfg.output:
        with open(cfg.output, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def number(x):
    """Exact value as a short decimal when it terminates, else p/q."""
    x = Fraction(x)
    d = x.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return str(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{float(x):.12f}".rstrip("0")


# ---------------------------------------------------------------------------
# subcommands

def cmd_build(cfg, args):
    M = load_machine(cfg, args)
    text = dumps(M.to_json())
    emit(cfg, text)
    sys.stderr.write(f"sha256 {hashlib.sha256((text + chr(10)).encode()).hexdigest()}\n")
    return OK


def cmd_describe(cfg, args):
    M = load_machine(cfg, args)
    if args.json:
        hw = M.hardware
        d = {"name": M.name, "parts": hw.n_parts, "sectors": hw.n_sectors,
             "positive_rules": len(M.positive), "cyclic": hw.cyclic,
             "input_sectors": list(M.input_sectors),
             "special_input_sector": M.special_input_sector}
        emit(cfg, dumps(d))
    else:
        emit(cfg, M.describe())
    return OK


def cmd_run(cfg, args):
    M = load_machine(cfg, args)
    W, hist = load_computation(M, args.file)
    try:
        c = run(W, hist, reduce=args.reduce)
    except RunError as e:
        raise CliError(PRECONDITION, str(e)) from None
    c.machine = M
    emit(cfg, dumps(c.to_json(with_trace=True)))
    return OK


def cmd_accept(cfg, args):
    M = load_machine(cfg, args)
    W = start_word(M, args)
    if not W.is_configuration():
        raise CliError(PRECONDITION, "start word is not on the standard base")
    if args.constructed:
        return _accept_constructed(cfg, M, W, args)
    limits = dict(cfg.limits, seed=seed_from_env())
    res = accept_search(W, M, limits)
    d = res.to_json()
    d["limits"].pop("seed", None)
    d["summary"] = res.summary()
    emit(cfg, dumps(d))
    return OK if res.accepted else EXHAUSTED


def _accept_constructed(cfg, M, W, args):
    """Replay the constructed accepting computation instead of searching."""
    if args.word is None or args.start or args.form not in (None, "I", "J"):
        raise CliError(MALFORMED, "--constructed takes --word with form I or J")
    special = args.form == "J"
    try:
        W = accept_input(M, args.word, special=special)
        c = run(W, accept_history(M, args.word, special=special))
    except (MachineError, RunError) as e:
        raise CliError(PRECONDITION, str(e)) from None
    c.machine = M
    ok = c.end.tokens == M.accept_config().tokens
    d = {"status": "accepted" if ok else "rejected", "computation": c.to_json(),
         "summary": f"constructed computation of length {c.t}" + ("" if ok else " misses the accept configuration")}
    emit(cfg, dumps(d))
    return OK if ok else FAILED


def cmd_steps(cfg, args):
    M = load_machine(cfg, args)
    W, hist = load_computation(M, args.file)
    c = Computation(M, W, hist)
    try:
        c.trace
        sh = step_history(c)
    except (RunError, StepHistoryError, ValueError) as e:
        raise CliError(PRECONDITION, str(e)) from None
    emit(cfg, dumps({"step_history": str(sh), "letters": list(sh.letters),
                     "one_machine": one_machine_index(c)}))
    return OK


def cmd_present(cfg, args):
    M = load_machine(cfg, args)
    n = cfg.params_obj.n
    try:
        P = emit_presentation(M, args.variant, args.bound, n if args.variant == "Ga" else None)
    except UnsupportedExponent as e:
        raise CliError(PRECONDITION, str(e)) from None
    except PresentationError as e:
        raise CliError(PRECONDITION, str(e)) from None
    emit(cfg, P.dumps() if args.format == "json" else P.to_text())
    return OK


def _write_diagram(cfg, args, d):
    if args.dot:
        emit(cfg, d.to_dot())
    else:
        emit(cfg, dumps(d.to_json()))


def cmd_trapezium(cfg, args):
    M = load_machine(cfg, args)
    W, hist = load_computation(M, args.file)
    try:
        c = run(W, hist)
        c.machine = M
        d = trapezium_from_computation(c)
    except (RunError, DiagramError) as e:
        raise CliError(PRECONDITION, str(e)) from None
    _write_diagram(cfg, args, d)
    return OK


def cmd_diskdiagram(cfg, args):
    M = load_machine(cfg, args)
    try:
        if args.power:
            tower = build_tower(cfg.params_obj, cfg.base)
            d = power_relator_diagram(args.word, tower=tower)
        else:
            W = accept_input(M, args.word, special=args.special)
            c = Computation(M, W, accept_history(M, args.word, special=args.special))
            d = disk_diagram(W, c)
    except (MachineError, DiagramError, RunError) as e:
        raise CliError(PRECONDITION, str(e)) from None
    _write_diagram(cfg, args, d)
    return OK


def _histogram(xs):
    h = {}
    for x in xs:
        h[str(x)] = h.get(str(x), 0) + 1
    return dict(sorted(h.items(), key=lambda kv: int(kv[0])))


def cmd_bands(cfg, args):
    M = load_machine(cfg, args)
    d = load_diagram(M, args.file)
    out = {}
    for kind in ("q", "theta", "a"):
        bs = maximal_bands(d, kind)
        out[kind] = {"bands": len(bs), "annular": sum(1 for b in bs if b.annular),
                     "lengths": _histogram(len(b.cells) for b in bs)}
    rep = check_no_annuli(d)
    counts = {k: len(v) for k, v in rep.items() if k != "ok"}
    if counts["theta"]:
        # rings round a hub come from gluing the trapezium sides; not defects
        around, other = hub_rings(d)
        counts["theta_around_hub"] = len(around)
        counts["theta"] = len(other)
    out["annuli"] = counts
    free = not any(v for k, v in counts.items() if k != "theta_around_hub")
    out["annulus_free"] = free
    emit(cfg, dumps(out))
    return OK if free or args.allow_annuli else FAILED


def cmd_measure(cfg, args):
    delta = Fraction(str(cfg.params["delta"]))
    c7 = Fraction(str(cfg.params["c7"]))
    text = read_text(args.file)
    if text.lstrip().startswith("{"):
        M = load_machine(cfg, args)
        d = load_diagram(M, args.file)
        s = signature(d, c7, delta)
        emit(cfg, dumps({"area": area(d), "weight": number(diagram_weight(d, c7, delta)),
                         "signature": s.to_json(),
                         "contour_length": number(path_length(d.boundary_label(), delta, d.P))}))
        return OK
    word = text.split()
    try:
        ln = path_length(word, delta)
    except DiagramError:
        M = load_machine(cfg, args)
        try:
            ln = path_length(word, delta, presentation_for(M))
        except (KeyError, DiagramError, PresentationError) as e:
            raise CliError(MALFORMED, f"cannot read word: {e}") from None
    emit(cfg, number(ln))
    return OK


def cmd_verify(cfg, args):
    from . import suites
    if args.list:
        emit(cfg, "\n".join(sorted(suites.SUITES) + suites.check_names()))
        return OK
    try:
        funcs = suites.resolve(cfg.suite)
    except KeyError:
        raise CliError(MALFORMED, f"unknown suite {cfg.suite}") from None
    results = []
    for f in funcs:
        c = suites.run_suite_one(f)
        results.append(c)
        if not args.json:
            sys.stdout.write(c.line() + "\n")
            table = c.measured.get("table") if isinstance(c.measured, dict) else None
            if table:
                sys.stdout.write("  k l    t  2lk+2k-1\n")
                for k, l, t, want in table:
                    sys.stdout.write(f"  {k} {l} {t!s:>4} {want:>9}\n")
            sys.stdout.flush()
    ok = all(c.ok for c in results)
    report = {"suite": cfg.suite, "ok": ok, "checks": [c.to_json() for c in results]}
    if args.json:
        emit(cfg, dumps(report))
    elif cfg.output:
        with open(cfg.output, "w") as f:
            f.write(dumps(report) + "\n")
    return OK if ok else FAILED


COMMANDS = {
    "build": cmd_build, "run": cmd_run, "accept": cmd_accept, "steps": cmd_steps,
    "present": cmd_present, "trapezium": cmd_trapezium, "diskdiagram": cmd_diskdiagram,
    "bands": cmd_bands, "measure": cmd_measure, "verify": cmd_verify, "describe": cmd_describe,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(MALFORMED, message)


def make_parser():
    common = _Parser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", help="JSON config file (schema smforge.config/1)")
    g.add_argument("--n", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--L", type=int)
    g.add_argument("--delta", type=Fraction)
    g.add_argument("--c7", type=Fraction)
    g.add_argument("--base", choices=("power_checker", "free_checker"))
    g.add_argument("--stage", help="tower stage (m1 ... m) or lr/rl")
    g.add_argument("--machine", help="machine JSON file instead of a stage")
    g.add_argument("--out", help="write output here instead of stdout")
    g.add_argument("--max-depth", dest="max_depth", type=int)
    g.add_argument("--max-states", dest="max_states", type=int)
    g.add_argument("--max-alen", dest="max_alen", type=int)

    p = _Parser(prog="smforge", description="S-machines, presentations and diagrams")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    s = sub.add_parser("build", parents=[common], help="write a machine JSON file")
    s = sub.add_parser("describe", parents=[common], help="summarize a machine")
    s.add_argument("--json", action="store_true")
    s = sub.add_parser("run", parents=[common], help="apply a history, print the trace")
    s.add_argument("file")
    s.add_argument("--reduce", action="store_true", help="freely reduce the history first")
    s = sub.add_parser("accept", parents=[common], help="bounded search for acceptance")
    s.add_argument("--word", help="input word, e.g. 'a1 a2^-1'")
    s.add_argument("--form", help="configuration kind (I, J, I5, I6, ...)")
    s.add_argument("--start", help="start configuration as tokens")
    s.add_argument("--constructed", action="store_true",
                   help="replay the constructed computation of u^n instead of searching")
    s = sub.add_parser("steps", parents=[common], help="step history of a computation")
    s.add_argument("file")
    s = sub.add_parser("present", parents=[common], help="emit the group presentation")
    s.add_argument("--variant", default="M", choices=("M", "Ga", "G"))
    s.add_argument("--bound", type=int, default=4, help="a-relator length bound for Ga")
    s.add_argument("--format", default="text", choices=("text", "json"))
    for name, helptext in (("trapezium", "trapezium of a computation"),
                           ("diskdiagram", "disk or power-relator diagram")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        if name == "trapezium":
            s.add_argument("file")
        else:
            s.add_argument("--word", required=True, help="u, the contour reads I(u^n)")
            s.add_argument("--special", action="store_true", help="use J(u^n)")
            s.add_argument("--power", action="store_true", help="diagram for the relator u^n")
        s.add_argument("--dot", action="store_true", help="DOT instead of JSON")
    s = sub.add_parser("bands", parents=[common], help="maximal bands and annuli of a diagram")
    s.add_argument("file")
    s.add_argument("--allow-annuli", action="store_true")
    s = sub.add_parser("measure", parents=[common], help="modified length or diagram weight")
    s.add_argument("file", help="word file (letters or q/a/t classes) or diagram JSON")
    s = sub.add_parser("verify", parents=[common], help="run property suites")
    s.add_argument("--suite")
    s.add_argument("--json", action="store_true")
    s.add_argument("--list", action="store_true")
    return p


def dispatch(argv=None):
    """Run one subcommand; returns the exit status."""
    try:
        args = make_parser().parse_args(argv)
        cfg = BuildConfig.load(args.config) if args.config else BuildConfig()
        cfg.override(args)
        return COMMANDS[args.command](cfg, args)
    except CliError as e:
        sys.stderr.write(f"smforge: {e}\n")
        return e.code


def main():
    try:
        code = dispatch()
        sys.stdout.flush()
    except BrokenPipeError:
        # output went to a closed pipe (e.g. head); not an error of ours
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        code = OK
    sys.exit(code)


if __name__ == "__main__":
    main()
