"""Command line entry point: ``wrtlab <subcommand> [flags]``.

Exit status is 0 on success, 1 when a verification fails (identity mismatch or
a statistical test rejects), and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import rw, spine, tilt
from .theta import solve_theta
from .trees import diameter, grow_pat, grow_wrt, height, mrca
from .weights import FitnessSequence, WeightSequence, check_h1, check_h2

SEED_ENV = "WRTLAB_SEED"
IDENTITY_RTOL = 1e-10
IDENTITIES = ("many-to-one", "many-to-two", "two-point", "one-point")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${SEED_ENV} or 0)")
    p.add_argument("--out", default=None, help="output file (default: standard output)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker cap (default: available cores)")


def _weight_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", choices=("constant", "polynomial", "iid", "file"),
                   default="constant")
    p.add_argument("--weight", type=float, default=1.0, help="constant weight value")
    p.add_argument("--exponent", type=float, default=0.0)
    p.add_argument("--coefficient", type=float, default=1.0)
    p.add_argument("--distribution", default="exponential")
    p.add_argument("--weights-seed", type=int, default=0)
    p.add_argument("--weights-file", default=None, help="one weight per line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wrtlab", allow_abbrev=False,
                     description="Weighted recursive trees: simulation and exact checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("theta", allow_abbrev=False, help="solve for theta and derived constants")
    p.add_argument("--gamma", type=float, required=True)
    _common(p)

    p = sub.add_parser("grow", allow_abbrev=False, help="grow one tree and write its parent array")
    p.add_argument("--model", choices=("wrt", "pat"), default="wrt")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--fitness", type=float, default=1.0, help="constant PAT fitness")
    p.add_argument("--stats", action="store_true", help="print height and diameter instead")
    _weight_flags(p)
    _common(p)

    p = sub.add_parser("verify", allow_abbrev=False, help="exact identity checks")
    p.add_argument("--identity", choices=IDENTITIES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--rtol", type=float, default=IDENTITY_RTOL)
    _common(p)

    p = sub.add_parser("rw", allow_abbrev=False, help="random walk tools")
    rsub = p.add_subparsers(dest="rw_command", required=True, parser_class=_Parser)
    q = rsub.add_parser("renewal", allow_abbrev=False, help="renewal function table")
    q.add_argument("--direction", choices=(rw.ASCENDING, rw.DESCENDING), default=rw.ASCENDING)
    q.add_argument("--x-max", type=int, default=20)
    q.add_argument("--samples", type=int, default=0, help="0 for the exact table")
    _common(q)
    q = rsub.add_parser("couple", allow_abbrev=False, help="Poisson coupling of a walk")
    q.add_argument("--spec", choices=("random", "poisson-limit"), default="random")
    q.add_argument("--blocks", type=int, default=20)
    q.add_argument("--replicas", type=int, default=100_000)
    _common(q)
    q = rsub.add_parser("barrier", allow_abbrev=False, help="barrier probability estimate")
    q.add_argument("--n", type=int, default=400)
    q.add_argument("--K", type=int, default=5)
    q.add_argument("--L", type=int, default=0)
    q.add_argument("--a", type=int, default=3)
    q.add_argument("--lam", type=float, default=0.5)
    q.add_argument("--block-size", type=int, default=1000)
    q.add_argument("--replicas", type=int, default=1_000_000)
    q.add_argument("--band", type=float, nargs=2, default=(0.7, 1.4), metavar=("LO", "HI"))
    _common(q)

    p = sub.add_parser("experiment", allow_abbrev=False, help="run a configured campaign")
    p.add_argument("--config", default=None, help="key = value file")
    p.add_argument("--experiment", choices=ex.EXPERIMENTS, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--n-grid", default=None, help="comma list or pow2:a:b")
    _common(p)

    p = sub.add_parser("check-assumptions", allow_abbrev=False,
                       help="growth and tail diagnostics of a weight sequence")
    p.add_argument("--n-max", type=int, default=1 << 16)
    _weight_flags(p)
    _common(p)
    return parser


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _weights(args) -> WeightSequence:
    if args.weights == "constant":
        return WeightSequence.constant(args.weight)
    if args.weights == "polynomial":
        return WeightSequence.polynomial(args.exponent, args.coefficient)
    if args.weights == "iid":
        return WeightSequence.iid(args.distribution, args.weights_seed)
    if args.weights_file is None:
        raise UsageError("--weights file requires --weights-file")
    return WeightSequence.from_file(args.weights_file)


def _kv(lines: dict) -> str:
    out = []
    for k, v in lines.items():
        if isinstance(v, float):
            v = f"{v:.12f}" if abs(v) >= 1e-4 or v == 0 else f"{v:.6e}"
        out.append(f"{k}={v}")
    return "\n".join(out) + "\n"


# -- subcommands ------------------------------------------------------------------


def _cmd_theta(args, seed):
    c = solve_theta(args.gamma)
    return "\n".join(c.as_lines()) + "\n", EXIT_OK


def _cmd_grow(args, seed):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    rng = np.random.default_rng(seed)
    if args.model == "pat":
        tree = grow_pat(FitnessSequence.constant(args.fitness), args.n, rng)
    else:
        tree = grow_wrt(_weights(args), args.n, rng)
    if args.stats:
        return _kv({"n": args.n, "height": height(tree), "diameter": diameter(tree)}), EXIT_OK
    return tree.to_text(), EXIT_OK


def _random_sequence(rng, n) -> WeightSequence:
    return WeightSequence.explicit(rng.exponential(1.0, n) + 0.05)


def _phi_battery():
    return [
        ("one", lambda t, i, j: 1.0),
        ("same_vertex", lambda t, i, j: float(i == j)),
        ("height_sum", lambda t, i, j: float(t.height[i] + t.height[j])),
        ("mrca_is_root", lambda t, i, j: float(mrca(t, i, j) == 1)),
        ("leaf_pair", lambda t, i, j: float(t.outdeg[i] == 0 and t.outdeg[j] == 0)),
        ("first_height", lambda t, i, j: float(t.height[i])),
    ]


def _cmd_verify(args, seed):
    n = args.n
    caps = {"many-to-one": tilt.MANY_TO_ONE_CAP, "many-to-two": tilt.MANY_TO_TWO_CAP,
            "two-point": spine.EXACT_CAP, "one-point": spine.EXACT_CAP}
    if not 2 <= n <= caps[args.identity]:
        raise UsageError(f"--n must lie in 2..{caps[args.identity]} for {args.identity}")
    if not args.theta > 0:
        raise UsageError("--theta must be positive")
    seq = _random_sequence(np.random.default_rng(seed), n)
    reports = []
    if args.identity == "many-to-one":
        for name, F in tilt.functional_battery(n):
            reports.append((name, tilt.many_to_one_check(seq, args.theta, n, F)))
    elif args.identity == "many-to-two":
        for name, F in tilt.functional_battery(n):
            for lname, f in tilt.label_battery(n):
                reports.append((f"{name}*{lname}", tilt.many_to_two_check(seq, args.theta, n, F, f)))
    elif args.identity == "two-point":
        for name, phi in _phi_battery():
            reports.append((name, spine.verify_two_point_identity(seq, n, phi)))
    else:
        for name, phi in _phi_battery():
            reports.append((name, spine.verify_one_point_identity(seq, n, lambda t, i, p=phi: p(t, i, i))))
    worst_name, worst = max(reports, key=lambda r: r[1].relative_discrepancy)
    ok = all(r.holds(args.rtol) for _, r in reports)
    text = _kv({
        "identity": args.identity, "n": n, "seed": seed, "checks": len(reports),
        "max_discrepancy": worst.relative_discrepancy, "worst": worst_name,
        "status": "pass" if ok else "fail",
    })
    return text, EXIT_OK if ok else EXIT_FAIL


def _cmd_rw(args, seed):
    if args.rw_command == "renewal":
        if args.samples > 0:
            table = rw.renewal_estimate(args.direction, args.x_max, args.samples,
                                        np.random.SeedSequence(seed))
        else:
            table = rw.renewal_exact(args.direction, args.x_max)
        return table.to_csv(), EXIT_OK
    if args.rw_command == "couple":
        rng = np.random.default_rng(seed)
        if args.spec == "random":
            spec = rw.random_walk_spec(args.blocks, rng)
        else:
            spec = rw.poisson_limit_spec(args.blocks)
        sample = rw.couple_poisson_batch(spec, 0, args.blocks, args.replicas, rng)
        rate = sample.disagreement_rate
        sigma = math.sqrt(max(rate * (1 - rate), 1e-300) / args.replicas)
        bound = rw.coupling_bound(spec, 0, args.blocks)
        ok = rate <= bound + 3 * sigma
        return _kv({
            "blocks": args.blocks, "replicas": args.replicas, "disagreement": rate,
            "disagreement_stderr": sigma,
            "exact": rw.coupling_disagreement_exact(spec, 0, args.blocks),
            "bound": bound, "status": "pass" if ok else "fail",
        }), EXIT_OK if ok else EXIT_FAIL
    spec = rw.poisson_limit_spec(args.n, args.block_size)
    est = rw.barrier_probability(spec, args.K, args.L, args.a, args.lam, args.n,
                                 args.replicas, np.random.SeedSequence(seed), args.threads)
    pred = rw.barrier_prediction(args.K, args.a, args.n)
    ratio = est.probability / pred
    lo, hi = args.band
    ok = lo <= ratio <= hi
    return _kv({
        "n": args.n, "K": args.K, "L": args.L, "a": args.a, "replicas": args.replicas,
        "probability": est.probability, "ci_low": est.ci_low, "ci_high": est.ci_high,
        "prediction": pred, "ratio": ratio, "status": "pass" if ok else "fail",
    }), EXIT_OK if ok else EXIT_FAIL


def _cmd_experiment(args, seed):
    overrides = {"experiment": args.experiment, "replicas": args.replicas,
                 "n_grid": args.n_grid, "threads": args.threads, "out": args.out}
    if args.config is not None:
        if not Path(args.config).is_file():
            raise UsageError(f"--config: no such file {args.config!r}")
        cfg = ex.ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ex.ExperimentConfig.from_text("", **overrides)
    # the flag or environment wins over the file only when given
    if args.seed is not None or os.environ.get(SEED_ENV) is not None:
        cfg = cfg.replace(seed=seed)
    rows = ex.run_experiment(cfg)
    return ex.results_csv(rows), EXIT_OK


def _cmd_check(args, seed):
    seq = _weights(args)
    if args.n_max < 100:
        raise UsageError("--n-max must be at least 100")
    rep = check_h1(seq, args.n_max).merge(check_h2(seq, args.n_max))
    buf = io.StringIO()
    rep.to_csv(buf)
    head = _kv({"gamma_hat": rep.gamma_hat, "lambda_hat": rep.lambda_hat,
                **{k: "pass" if v else "fail" for k, v in rep.verdict.items()}})
    text = "".join("# " + line + "\n" for line in head.splitlines()) + buf.getvalue()
    return text, EXIT_OK if all(rep.verdict.values()) else EXIT_FAIL


COMMANDS = {"theta": _cmd_theta, "grow": _cmd_grow, "verify": _cmd_verify, "rw": _cmd_rw,
            "experiment": _cmd_experiment, "check-assumptions": _cmd_check}


def run(argv=None) -> int:
    """Parse ``argv`` and execute; returns the exit status."""
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        seed = _seed(args)
        text, status = COMMANDS[args.command](args, seed)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, IndexError) as err:
        print(f"wrtlab: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
