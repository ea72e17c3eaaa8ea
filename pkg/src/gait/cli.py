"""Command-line entry point: ``gait <subcommand> [flags]``.

Exit status is 0 on success, 1 on invalid input (one diagnostic line on
stderr) and 2 when an optimiser hits a non-finite objective or gradient.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__, _accel
from . import io as gio
from .divergence import EmpiricalMeasure, forward_backward, gait_divergence_empirical
from .entropy import diversity, gait_entropy
from .exceptions import InfiniteDivergence, NumericalFailure, ValidationError
from .infotheory import JointDistribution, conditional_entropy, dpi_search, joint_entropy, mutual_information, _H
from .kernels import FAMILIES, KernelSpec, SimilaritySpace, build_block_gram, build_gram
from .modes import birthday_sweep, curvature_select, diversity_sweep, scale_grid
from .optimize import OptimizerConfig, SparsityPenalty, approximate_measure, barycenter_solve, maxent_solve, minibatch_sample
from .verify import SearchConfig, hessian_spectrum_search, parallel_lines_check, random_search_divergence, segment_search

log = logging.getLogger("gait")

FORMATS = """file formats (UTF-8 text, '#' starts a comment):
  points   first line "d n", then n lines of d decimals
  gram     first line "n", then n lines of n decimals (symmetric, unit diagonal, entries in [0, 1])
  dist     whitespace-separated decimals summing to 1 (within 1e-6)
  joint    first line "n m", then n lines of m decimals summing to 1
  grid     PGM (P2 ASCII) or first line "d" then d lines of d non-negative decimals
  measure  (output) first line "d m", then m lines of d coordinates and a weight
  trace    (output) CSV "step,objective" or "scale,value,smoothed_d2"
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _kernel_args(p, sigma=1.0):
    p.add_argument("--kernel", choices=sorted(FAMILIES), default="rbf_sq")
    p.add_argument("--sigma", type=float, default=sigma, help="kernel bandwidth")
    p.add_argument("--exponent", type=float, default=1.5, help="polynomial kernel exponent")
    p.add_argument("--norm-order", type=float, default=2.0, help="exp_metric norm order")


def _opt_args(p, steps, lr, batch=None):
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--lr", type=float, default=lr, help="Adam step size")
    p.add_argument("--batch", type=int, default=batch)
    p.add_argument("--temperature", type=float, default=1.0, help="softmax temperature")
    p.add_argument("--amsgrad", action="store_true", help="use the running maximum of the second moment")
    p.add_argument("--trace", help="write a per-step CSV trace here")


def build_parser():
    parser = _Parser(
        prog="gait",
        description="Geometry-aware entropy, divergence and mutual information.",
        epilog=FORMATS,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"gait {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker threads (GAIT_THREADS overrides)")
    common.add_argument("--manifest", help="write the run manifest (JSON) here")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help):
        return sub.add_parser(name, help=help, parents=[common], epilog=FORMATS, formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("entropy", "entropy and diversity of a distribution on a Gram matrix")
    p.add_argument("--gram", required=True)
    p.add_argument("--dist", required=True)
    p.add_argument("--alpha", default="1", help="order; a number or 'inf'")

    p = add("divergence", "divergence between two weighted point sets")
    p.add_argument("--x", required=True, help="points of P")
    p.add_argument("--y", required=True, help="points of Q")
    p.add_argument("--px", help="weights of P (default uniform)")
    p.add_argument("--qy", help="weights of Q (default uniform)")
    p.add_argument("--both", action="store_true", help="also report D(Q || P)")
    _kernel_args(p)

    p = add("maxent", "maximum-entropy distribution by gradient ascent")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gram")
    src.add_argument("--points")
    _kernel_args(p)
    _opt_args(p, 1000, 0.1)
    p.add_argument("--out", help="write the maximiser here (one value per line)")

    p = add("barycenter", "barycenter of grid images under the Gaussian kernel")
    p.add_argument("--images", required=True, help="directory of .pgm / .txt grids")
    p.add_argument("--sigma", type=float, default=0.04)
    _opt_args(p, 500, 0.01, batch=32)
    p.add_argument("--out", required=True, help="output PGM")

    p = add("approx", "fit a small weighted point set to a target")
    p.add_argument("--target", required=True, help="target points")
    p.add_argument("--target-weights")
    p.add_argument("--init", help="initial atoms (default: --m draws from the target)")
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--mode", choices=("locations", "weights", "both"), default="locations")
    p.add_argument("--penalty", type=float, help="sparsity weight lambda (weights/both only)")
    p.add_argument("--rho", type=float, default=0.75)
    p.add_argument("--prune", type=float, default=0.01)
    _kernel_args(p, sigma=0.02)
    _opt_args(p, 3000, 1e-3, batch=None)
    p.add_argument("--out", required=True, help="output measure file")

    p = add("modes", "effective number of modes from a scale sweep")
    p.add_argument("--points", required=True)
    p.add_argument("--weights")
    p.add_argument("--method", choices=("diversity", "birthday"), default="diversity")
    p.add_argument("--scale-min", type=float, default=0.1)
    p.add_argument("--scale-max", type=float, default=25.0)
    p.add_argument("--scale-count", type=int, default=100)
    p.add_argument("--relative", action="store_true", help="multiply scales by the data diameter")
    p.add_argument("--norm-order", type=float, default=2.0, help="collision distance norm")
    p.add_argument("--out", help="CSV output (default stdout)")

    p = add("mi", "entropies and mutual information of a two-way joint")
    p.add_argument("--joint", required=True)
    p.add_argument("--gramx", required=True)
    p.add_argument("--gramy", required=True)

    p = add("verify", "randomised checks")
    p.add_argument("--check", choices=("divergence", "hessian", "segment", "lines", "dpi"), required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--out", help="counterexample records (JSON lines)")
    return parser


# ---------------------------------------------------------------------------
# subcommands; each returns (stdout text, output files)
# ---------------------------------------------------------------------------


def _spec(a):
    return KernelSpec(a.kernel, a.sigma, a.exponent, a.norm_order)


def _config(a, **kw):
    return OptimizerConfig(
        step_size=a.lr, steps=a.steps, batch_size=a.batch, seed=a.seed,
        temperature=a.temperature, max_correction=a.amsgrad, **kw,
    )


def _trace(a, values, outputs):
    if a.trace:
        gio.emit_trace(a.trace, [(i, v) for i, v in enumerate(values)])
        outputs.append(a.trace)


def cmd_entropy(a):
    K = SimilaritySpace.explicit(gio.read_gram(a.gram))
    p = gio.read_distribution(a.dist, K.n)
    alpha = a.alpha
    h = gait_entropy(K, p, alpha)
    return f"{gio.fmt(h)}\n{gio.fmt(diversity(K, p, alpha))}\n", []


def cmd_divergence(a):
    x, y = gio.read_points(a.x), gio.read_points(a.y)
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"{a.x} and {a.y} have different dimensions")
    px = gio.read_distribution(a.px, len(x)) if a.px else np.full(len(x), 1.0 / len(x))
    qy = gio.read_distribution(a.qy, len(y)) if a.qy else np.full(len(y), 1.0 / len(y))
    blocks = build_block_gram(x, y, _spec(a))
    try:
        rep = gait_divergence_empirical(blocks, px, qy)
        lines = [f"value {gio.fmt(rep.value)}", f"term_log {gio.fmt(rep.term_log)}", f"term_ratio {gio.fmt(rep.term_ratio)}"]
    except InfiniteDivergence:
        lines = ["value inf"]
    if a.both:
        try:
            back = forward_backward(blocks, px, qy)[1]
        except InfiniteDivergence:
            back = math.inf
        lines.append(f"reverse {gio.fmt(back)}")
    return "\n".join(lines) + "\n", []


def cmd_maxent(a):
    if a.gram:
        space = SimilaritySpace.explicit(gio.read_gram(a.gram))
    else:
        space = build_gram(gio.read_points(a.points), _spec(a))
    p, trace = maxent_solve(space, _config(a))
    outputs = []
    _trace(a, trace, outputs)
    h = gait_entropy(space, p)
    body = "".join(gio.fmt(v) + "\n" for v in p)
    if a.out:
        gio._write(a.out, body)
        outputs.insert(0, a.out)
        body = ""
    return body + f"entropy {gio.fmt(h)}\ndiversity {gio.fmt(math.exp(h))}\n", outputs


def cmd_barycenter(a):
    images = gio.read_grids(a.images)
    grid, trace = barycenter_solve(images, a.sigma, _config(a))
    outputs = []
    _trace(a, trace, outputs)
    gio.write_pgm(a.out, grid)
    outputs.insert(0, a.out)
    return f"objective {gio.fmt(trace[-1])}\n", outputs


def cmd_approx(a):
    pts = gio.read_points(a.target)
    tw = gio.read_distribution(a.target_weights, len(pts)) if a.target_weights else np.full(len(pts), 1.0 / len(pts))
    target = EmpiricalMeasure(pts, tw)
    if a.init:
        init = EmpiricalMeasure.uniform(gio.read_points(a.init))
    else:
        if a.m < 1:
            raise ValidationError("--m must be at least 1")
        init = minibatch_sample(target, a.m, np.random.default_rng([a.seed, 1]))
    penalty = SparsityPenalty(a.penalty, a.rho, a.prune) if a.penalty is not None else None
    fitted, trace = approximate_measure(target, init, _spec(a), a.mode, penalty, _config(a))
    outputs = []
    _trace(a, trace, outputs)
    gio.write_measure(a.out, fitted.atoms, fitted.weights)
    outputs.insert(0, a.out)
    return f"objective {gio.fmt(trace[-1])}\nsupport {int(np.count_nonzero(fitted.weights))}\n", outputs


def cmd_modes(a):
    pts = gio.read_points(a.points)
    w = gio.read_distribution(a.weights, len(pts)) if a.weights else None
    if a.scale_count < 3 or not 0 < a.scale_min < a.scale_max:
        raise ValidationError("need 0 < --scale-min < --scale-max and --scale-count >= 3")
    scales = scale_grid(a.scale_min, a.scale_max, a.scale_count, pts if a.relative else None)
    if a.method == "diversity":
        sweep = diversity_sweep(pts, w, scales)
    else:
        if w is not None:
            raise ValidationError("--weights is not used by the birthday method")
        sweep = birthday_sweep(pts, scales, a.norm_order)
    sel = curvature_select(sweep)
    rows = [
        ",".join(gio.fmt(v) for v in row)
        for row in zip(sel.scales, sel.values, sel.smoothed_second_deriv)
    ]
    tail = "selected,none,none" if sel.selected_index is None else f"selected,{gio.fmt(sel.selected_scale)},{gio.fmt(sel.estimate)}"
    text = "scale,value,smoothed_d2\n" + "".join(r + "\n" for r in rows) + tail + "\n"
    if a.out:
        gio._write(a.out, text)
        return tail + "\n", [a.out]
    return text, []


def cmd_mi(a):
    table = gio.read_joint(a.joint)
    j = JointDistribution(table, (SimilaritySpace.explicit(gio.read_gram(a.gramx)).K, SimilaritySpace.explicit(gio.read_gram(a.gramy)).K))
    rows = [
        ("H[X]", _H(j, (0,))),
        ("H[Y]", _H(j, (1,))),
        ("H[X,Y]", joint_entropy(j)),
        ("H[X|Y]", conditional_entropy(j, 0, 1)),
        ("I[X;Y]", mutual_information(j, 0, 1)),
    ]
    return "".join(f"{k} {gio.fmt(v)}\n" for k, v in rows), []


def cmd_verify(a):
    if a.trials < 1:
        raise ValidationError("--trials must be at least 1")
    if a.check == "lines":
        rows = parallel_lines_check()
        text = "phi,numeric,analytic,abs_error\n" + "".join(
            f"{gio.fmt(r['phi'])},{gio.fmt(r['numeric'])},{gio.fmt(r['analytic'])},{gio.fmt(r['abs_error'])}\n" for r in rows
        )
        return text, []
    if a.check == "dpi":
        res = dpi_search(a.trials, a.seed)
        return f"trials {res.trials}\nmin_slack {gio.fmt(res.min_slack)}\nviolations {len(res.violations)}\n", []
    config = SearchConfig(trials=a.trials, seed=a.seed, out=a.out)
    run = {"divergence": random_search_divergence, "hessian": hessian_spectrum_search, "segment": segment_search}[a.check]
    s = run(config)
    lines = [f"trials {s.trials}", f"min {gio.fmt(s.min_value)}", f"max {gio.fmt(s.max_value)}", f"counterexamples {len(s.counterexamples)}"]
    if s.histogram is not None:
        lines.append("histogram " + " ".join(str(int(c)) for c in s.histogram))
    return "\n".join(lines) + "\n", [a.out] if a.out else []


COMMANDS = {
    "entropy": cmd_entropy,
    "divergence": cmd_divergence,
    "maxent": cmd_maxent,
    "barycenter": cmd_barycenter,
    "approx": cmd_approx,
    "modes": cmd_modes,
    "mi": cmd_mi,
    "verify": cmd_verify,
}

_INPUT_FLAGS = ("gram", "dist", "x", "y", "px", "qy", "points", "weights", "target", "target_weights", "init", "joint", "gramx", "gramy")


def _digest(path):
    h = hashlib.sha256()
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            h.update(name.encode())
            with open(os.path.join(path, name), "rb") as fh:
                h.update(fh.read())
    else:
        with open(path, "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def run_manifest(args, duration):
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "manifest", "verbose")}
    inputs = {}
    for key in _INPUT_FLAGS + ("images",):
        path = getattr(args, key, None)
        if path:
            inputs[path] = _digest(path)
    return {
        "subcommand": args.command,
        "flags": flags,
        "seed": args.seed,
        "inputs": inputs,
        "version": __version__,
        "duration_s": round(duration, 6),
    }


def _threads(args):
    env = os.environ.get("GAIT_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"GAIT_THREADS must be an integer, got {env!r}") from None
    return args.threads


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        threads = _threads(args)
        if threads < 1:
            raise ValidationError("thread count must be at least 1")
        _accel.set_threads(threads)
        start = time.perf_counter()
        text, outputs = COMMANDS[args.command](args)
        sys.stdout.write(text)
        sys.stdout.flush()
        manifest_path = args.manifest or (outputs[0] + ".manifest.json" if outputs else None)
        if manifest_path:
            gio._write(manifest_path, json.dumps(run_manifest(args, time.perf_counter() - start), indent=2, sort_keys=True) + "\n")
        return 0
    except NumericalFailure as exc:
        print(f"gait: numerical failure at step {exc.step}: non-finite {exc.what}", file=sys.stderr)
        return 2
    except (ValidationError, InfiniteDivergence) as exc:
        print(f"gait: {str(exc).splitlines()[0] if str(exc) else type(exc).__name__}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
