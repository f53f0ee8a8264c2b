import argparse
import json
import logging
import multiprocessing
import os
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from .errors import AchamError, SchemaError

# Heavy modules (numpy/scipy) are imported lazily inside the commands.

PRECISION_ENV = "ACHAM_PRECISION"
CONFIG_NAME = "acham.toml"


# Setup logging
def setup_logging(verbose=False):
    log_format = '%(asctime)s - %(levelname)s - %(message)s'
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(level=level, format=log_format, handlers=[logging.StreamHandler(sys.stderr)], force=True)
    return logging.getLogger(__name__)


logger = logging.getLogger(__name__)


def load_config(start_dir=None):
    """
    Load config with precedence:
    1. Project config (acham.toml in start_dir or up to 5 parents)
    2. Local config (./acham.toml)
    3. Global config (~/.acham.toml)
    4. Defaults
    """
    config = {
        "precision": None,
        "jobs": 1,
        "eps": "auto",
        "beta": 1.0,
        "delta": 0.5,
        "t": 1.0,
        "t_block": 1.0,
        "generate": {},
    }
    loaded_configs = set()

    def merge_from_file(path, name):
        resolved_path = path.resolve()
        if resolved_path in loaded_configs or not path.exists():
            return
        try:
            with open(path, "rb") as f:
                user_config = tomllib.load(f)
            config.update(user_config)
            loaded_configs.add(resolved_path)
            logger.debug(f"Loaded {name} config from {path}. Keys: {list(user_config.keys())}")
        except Exception as e:
            logger.warning(f"Failed to load {name} config from {path}: {e}")

    merge_from_file(Path.home() / ".acham.toml", "global")
    merge_from_file(Path.cwd() / CONFIG_NAME, "local")

    if start_dir is not None:
        p = Path(start_dir).resolve()
        if not p.is_dir():
            p = p.parent
        candidates = []
        for _ in range(5):
            if (p / CONFIG_NAME).exists():
                candidates.append(p / CONFIG_NAME)
            if p.parent == p:
                break
            p = p.parent
        # Root-most first so the closest file wins
        for cfg_path in reversed(candidates):
            merge_from_file(cfg_path, "project")

    env_precision = os.environ.get(PRECISION_ENV)
    if env_precision:
        try:
            config["precision"] = int(env_precision)
        except ValueError:
            logger.warning(f"Ignoring {PRECISION_ENV}={env_precision!r}: not an integer")
    return config


def resolve_eps(flag, config):
    """``--eps`` value or config default; ``None`` means use the realized eps."""
    value = flag if flag is not None else config.get("eps", "auto")
    if value is None or (isinstance(value, str) and value.lower() == "auto"):
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"--eps must be 'auto' or a number, got {value!r}")


def get_template_path(name):
    """Get path to a template file"""
    return Path(__file__).parent / "templates" / name


def manage_config(init=False):
    """Manage configuration files"""
    if init:
        target_path = Path.cwd() / CONFIG_NAME
        if target_path.exists():
            print(f"❌ Error: '{CONFIG_NAME}' already exists in current directory.")
            return 1
        template_path = get_template_path(CONFIG_NAME)
        if not template_path.exists():
            print(f"❌ Error: Template not found at {template_path}")
            return 1
        shutil.copy(template_path, target_path)
        print(f"✅ Created '{CONFIG_NAME}' in {Path.cwd()}")
    return 0


def _load_instance(path):
    from .documents import read_document
    from .model import ingest

    return ingest(read_document(path))


def generate_instance(family, params_json, output, config):
    from .documents import write_document
    from .generators import GeneratorSpec, generate, realized_epsilon
    from .model import serialize

    try:
        params = json.loads(params_json) if params_json else {}
    except json.JSONDecodeError as e:
        raise SchemaError(f"--params is not valid JSON: {e}") from e
    if not isinstance(params, dict):
        raise SchemaError("--params must be a JSON object")
    defaults = config.get("generate", {}).get(family, {})
    spec = GeneratorSpec.from_params(family, {**defaults, **params})
    H = generate(spec)
    write_document(serialize(H), output, config["precision"])
    print(f"✅ Generated {family}: n={H.n}, m={H.m}, eps={realized_epsilon(H):.6g} -> {output}")
    return 0


def round_one(input_path, output_path, report_path, eps, precision):
    """Round a single instance file; returns the exit code."""
    from .documents import write_document
    from .model import serialize
    from .rounding import round_hamiltonian

    try:
        H = _load_instance(input_path)
        Hhat, report = round_hamiltonian(H, eps_override=eps)
        write_document(serialize(Hhat), output_path, precision)
        write_document(report.to_document(), report_path, precision)
    except AchamError as e:
        logger.error(f"❌ {input_path}: {e}")
        return e.exit_code
    if report.bounds_satisfied:
        print(f"✅ {input_path}: m={H.m}, eps={report.eps:.6g}, residual={report.max_residual_commutator:.1e}")
        return 0
    print(f"❌ {input_path}: {len(report.violations)} bound violation(s), see {report_path}")
    return 1


def initialize_worker(verbose=False):
    setup_logging(verbose)


def round_batch(input_dir, output_dir, eps, precision, jobs, verbose=False):
    """Round every ``*.json`` instance in ``input_dir`` into ``output_dir``."""
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    files = sorted(p for p in input_dir.glob("*.json") if not p.name.endswith((".rounded.json", ".report.json")))
    if not files:
        logger.error(f"No instance files found in {input_dir}")
        return 2
    output_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (str(f), str(output_dir / f"{f.stem}.rounded.json"), str(output_dir / f"{f.stem}.report.json"), eps, precision)
        for f in files
    ]

    num_workers = max(1, int(jobs))
    cpu_cap = os.cpu_count() or 1
    if num_workers > cpu_cap:
        logger.warning(f"Limiting workers to {cpu_cap} (available CPUs)")
        num_workers = cpu_cap
    num_workers = min(num_workers, len(tasks))

    logger.info(f"🚀 Rounding {len(tasks)} instances with {num_workers} worker(s)...")
    if num_workers == 1:
        codes = [round_one(*t) for t in tasks]
    else:
        ctx = multiprocessing.get_context("spawn")
        with ctx.Pool(processes=num_workers, initializer=initialize_worker, initargs=(verbose,)) as pool:
            codes = pool.starmap(round_one, tasks)
    failed = sum(1 for c in codes if c)
    if failed:
        print(f"❌ {failed}/{len(codes)} instances failed")
    else:
        print(f"✅ All {len(codes)} instances rounded")
    return max(codes)


def round_command(input_path, output, report, eps, config, jobs=None, verbose=False):
    input_path = Path(input_path)
    if input_path.is_dir():
        out_dir = Path(output) if output else input_path / "rounded"
        return round_batch(input_path, out_dir, eps, config["precision"], jobs or config["jobs"], verbose)
    if not input_path.exists():
        logger.error(f"Input not found: {input_path}")
        return 2
    output = Path(output) if output else input_path.with_name(f"{input_path.stem}.rounded.json")
    report = Path(report) if report else output.with_name(f"{input_path.stem}.report.json")
    return round_one(str(input_path), str(output), str(report), eps, config["precision"])


def verify_command(input_path, rounded_path, report_path, eps, tol, output, config):
    from .documents import read_document, write_document
    from .verify import audit_bounds

    H = _load_instance(input_path)
    Hhat = _load_instance(rounded_path)
    report = read_document(report_path) if report_path else None
    vr = audit_bounds(H, Hhat, report=report, eps=eps, tol=tol)
    if output:
        write_document(vr.to_document(), output, config["precision"])
    if vr.passed:
        print(f"✅ Audit passed: residual={vr.max_residual:.1e}, distance={vr.global_distance:.6g}")
        return 0
    for v in vr.violations:
        print(f"❌ {v}")
    return 1


def reduce_command(input_path, a, b, eps, output, config):
    from .apps import PromiseInstance, reduce_promise
    from .documents import read_document, write_document

    raw = read_document(input_path)
    if a is not None:
        raw["a"] = a
    if b is not None:
        raw["b"] = b
    inst = PromiseInstance.from_document(raw)
    reduced = reduce_promise(inst, eps)
    write_document(reduced.to_document(), output, config["precision"])
    print(f"✅ Reduced promise: a'={reduced.a:.6g}, b'={reduced.b:.6g} -> {output}")
    return 0


def gibbs_command(input_path, beta, delta, eps, output, config):
    from .apps import certify_gibbs_reduction
    from .documents import write_document

    H = _load_instance(input_path)
    cert = certify_gibbs_reduction(H, beta, delta, eps)
    write_document(cert.to_document(), output, config["precision"])
    measured = "n/a" if cert.measured_trace_distance is None else f"{cert.measured_trace_distance:.6g}"
    marker = "✅" if cert.regime_ok else "⚠️"
    print(f"{marker} Gibbs bound {cert.continuity_bound:.6g}, measured {measured}, regime_ok={cert.regime_ok}")
    return 0


def split_command(input_path, t, t_block, eps, output, config):
    from .apps import simulation_split
    from .documents import write_document

    H = _load_instance(input_path)
    split = simulation_split(H, eps)
    write_document(split.to_document(t, t_block), output, config["precision"])
    print(f"✅ alpha_A={split.alpha_A:.6g}, alpha_B={split.alpha_B:.6g}; {split.cost_formula(t, t_block)}")
    return 0


def evolve_command(input_path, t, output, config):
    from .apps import evolution_check
    from .documents import write_document

    Hc = _load_instance(input_path)
    doc = evolution_check(Hc, t)
    write_document(doc, output, config["precision"])
    print(f"✅ Product formula deviation {doc['deviation']:.3e} at t={t:g}")
    return 0


def _default_output(input_path, suffix):
    p = Path(input_path)
    return p.with_name(f"{p.stem}.{suffix}.json")


def build_parser():
    parser = argparse.ArgumentParser(description="Round almost-commuting 2-local Hamiltonians")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # GENERATE Command
    gen_parser = subparsers.add_parser("generate", help="Generate an instance document")
    gen_parser.add_argument("--family", required=True, help="Instance family (e.g. tfim-chain, triangle-figure)")
    gen_parser.add_argument("--params", default="{}", help='Family parameters as JSON, e.g. \'{"n": 4, "h": 0.05}\'')
    gen_parser.add_argument("-o", "--output", required=True, help="Output instance path")

    # ROUND Command
    round_parser = subparsers.add_parser("round", help="Round an instance (file or directory) to a commuting one")
    round_parser.add_argument("input", help="Instance file or directory of instances")
    round_parser.add_argument("-o", "--output", help="Rounded instance path (directory in batch mode)")
    round_parser.add_argument("-r", "--report", help="Report path")
    round_parser.add_argument("--eps", help="Promised eps or 'auto' (default: from config, else auto)")
    round_parser.add_argument("-j", "--jobs", type=int, help="Parallel workers for directories (default: config)")

    # VERIFY Command
    verify_parser = subparsers.add_parser("verify", help="Audit a rounded instance against its input")
    verify_parser.add_argument("input", help="Original instance")
    verify_parser.add_argument("rounded", help="Rounded instance")
    verify_parser.add_argument("--report", help="Rounding report to cross-check")
    verify_parser.add_argument("--eps", help="Promised eps or 'auto'")
    verify_parser.add_argument("--tol", type=float, default=1e-9, help="Commutation tolerance (default: 1e-9)")
    verify_parser.add_argument("-o", "--output", help="Write the verification report here")

    # REDUCE Command
    reduce_parser = subparsers.add_parser("reduce", help="Reduce a promise instance to a commuting one")
    reduce_parser.add_argument("input", help="Instance (may carry 'a' and 'b')")
    reduce_parser.add_argument("--a", type=float, help="YES threshold")
    reduce_parser.add_argument("--b", type=float, help="NO threshold")
    reduce_parser.add_argument("--eps", help="Promised eps or 'auto'")
    reduce_parser.add_argument("-o", "--output", help="Reduced instance path")

    # GIBBS Command
    gibbs_parser = subparsers.add_parser("gibbs", help="Certify Gibbs-state continuity under rounding")
    gibbs_parser.add_argument("input", help="Instance path")
    gibbs_parser.add_argument("--beta", type=float, help="Inverse temperature (default: config)")
    gibbs_parser.add_argument("--delta", type=float, help="Target accuracy (default: config)")
    gibbs_parser.add_argument("--eps", help="Promised eps or 'auto'")
    gibbs_parser.add_argument("-o", "--output", help="Certificate path")

    # SPLIT Command
    split_parser = subparsers.add_parser("split", help="Split H into a commuting part and a small remainder")
    split_parser.add_argument("input", help="Instance path")
    split_parser.add_argument("--t", type=float, help="Evolution time (default: config)")
    split_parser.add_argument("--t-block", dest="t_block", type=float, help="Block-encoding cost (default: config)")
    split_parser.add_argument("--eps", help="Promised eps or 'auto'")
    split_parser.add_argument("-o", "--output", help="Split document path")

    # EVOLVE Command
    evolve_parser = subparsers.add_parser("evolve", help="Check the product formula on a commuting instance")
    evolve_parser.add_argument("input", help="Commuting instance path")
    evolve_parser.add_argument("--t", type=float, help="Evolution time (default: config)")
    evolve_parser.add_argument("-o", "--output", help="Evolution check path")

    # CONFIG Command
    config_parser = subparsers.add_parser("config", help="Manage configuration")
    config_parser.add_argument("--init", action="store_true", help=f"Initialize a {CONFIG_NAME} in current directory")

    for sub in (gen_parser, round_parser, verify_parser, reduce_parser, gibbs_parser, split_parser, evolve_parser):
        sub.add_argument("-v", "--verbose", action="store_true", help="Verbose logging")
    return parser


def dispatch(args):
    if args.command == "config":
        return manage_config(init=args.init)

    config = load_config(getattr(args, "input", None))
    if args.command == "generate":
        return generate_instance(args.family, args.params, args.output, config)

    eps = resolve_eps(getattr(args, "eps", None), config)
    if args.command == "round":
        return round_command(args.input, args.output, args.report, eps, config, args.jobs, args.verbose)
    elif args.command == "verify":
        return verify_command(args.input, args.rounded, args.report, eps, args.tol, args.output, config)
    elif args.command == "reduce":
        output = args.output or _default_output(args.input, "reduced")
        return reduce_command(args.input, args.a, args.b, eps, output, config)
    elif args.command == "gibbs":
        beta = args.beta if args.beta is not None else config["beta"]
        delta = args.delta if args.delta is not None else config["delta"]
        output = args.output or _default_output(args.input, "gibbs")
        return gibbs_command(args.input, beta, delta, eps, output, config)
    elif args.command == "split":
        t = args.t if args.t is not None else config["t"]
        t_block = args.t_block if args.t_block is not None else config["t_block"]
        output = args.output or _default_output(args.input, "split")
        return split_command(args.input, t, t_block, eps, output, config)
    elif args.command == "evolve":
        t = args.t if args.t is not None else config["t"]
        output = args.output or _default_output(args.input, "evolve")
        return evolve_command(args.input, t, output, config)
    raise SchemaError(f"Unknown command {args.command!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(getattr(args, "verbose", False))

    try:
        code = dispatch(args)
    except AchamError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ {e}")
        code = e.exit_code
    except FileNotFoundError as e:
        logger.error(f"Input not found: {e.filename}")
        print(f"❌ Input not found: {e.filename}")
        code = 2

    if code:
        sys.exit(code)
    return 0


if __name__ == "__main__":
    main()
