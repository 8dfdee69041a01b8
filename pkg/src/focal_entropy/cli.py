"""Command-line entry point ``focal-entropy``.

Exit status is 0 on success, 2 when a numerical routine fails (a JSON
diagnostic goes to stderr) and 64 on invalid usage.  Floats are written with
17 significant digits and LF line endings.  ``FOCAL_LOG`` sets the logging
level (e.g. ``DEBUG``); it never changes results.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import enum
import io
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from focal_entropy import figures
from focal_entropy.errors import ConvergenceError, DomainError, LabelMismatchError
from focal_entropy.experiments import (
    SyntheticSpec,
    TrainConfig,
    compare_posteriors,
    ingest_mnist,
    posterior_to_csv,
    sample_synthetic,
    synthetic_posterior,
    theory_table,
    train_classifier,
)
from focal_entropy.experiments.mnist import IdxFormatError
from focal_entropy.focal_scalar import focal_loss, focal_loss_d1, focal_loss_d2, kappa, phi
from focal_entropy.minimizer import (
    alpha_asymptotic,
    alpha_bounds,
    brute_force_minimizer,
    recurse_minimizer,
    solve_minimizer,
)
from focal_entropy.pmf import (
    Pmf,
    cross_entropy,
    focal_entropy,
    focal_entropy_dgamma,
    h_gamma,
    kl_divergence,
    rho_and_r,
    shannon_entropy,
)
from focal_entropy.regime_analysis import (
    analyze,
    binary_bounds,
    limit_diagnostic,
    limit_target,
    simplex_scan,
    sufficient_conditions,
)

EXIT_OK = 0
EXIT_NUMERIC = 2
EXIT_USAGE = 64

log = logging.getLogger("focal_entropy")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- formatting ----------------------------------------------------------------


def fmt(x) -> str:
    """17-significant-digit text for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NaN"
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


def _plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(obj.to_dict() if hasattr(obj, "to_dict") else dataclasses.asdict(obj))
    if isinstance(obj, Pmf):
        return _plain(obj.to_dict())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dump_json(obj) -> str:
    """JSON text with every float written at 17 significant digits."""

    def enc(v):
        if isinstance(v, dict):
            return "{" + ", ".join(f"{json.dumps(k)}: {enc(x)}" for k, x in v.items()) + "}"
        if isinstance(v, list):
            return "[" + ", ".join(enc(x) for x in v) + "]"
        if isinstance(v, bool) or v is None:
            return json.dumps(v)
        if isinstance(v, (int, float)):
            return fmt(v)
        return json.dumps(v)

    return enc(_plain(obj)) + "\n"


def dump_csv(header, rows, comment: Optional[str] = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if not isinstance(v, (list, dict)) else dump_json(v).strip() for v in r])
    return buf.getvalue()


def _record_csv(record: dict) -> str:
    flat = _plain(record)
    return dump_csv(list(flat), [list(flat.values())])


# -- argument types --------------------------------------------------------------


def _gamma(text):
    try:
        g = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid float {text!r}")
    if not math.isfinite(g) or g < 0:
        raise argparse.ArgumentTypeError(f"gamma must be finite and >= 0, got {text}")
    return g


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return v


def _prob_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _float_list(text):
    vals = _prob_list(text)
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _load_pmf(values, path, flag) -> Pmf:
    try:
        if path is not None:
            return Pmf.from_dict(json.loads(Path(path).read_text()))
        if values is None:
            raise UsageError(f"{flag} is required")
        return Pmf(values)
    except (DomainError, KeyError, json.JSONDecodeError, OSError) as exc:
        raise UsageError(f"{flag}: {exc}")


# -- command handlers --------------------------------------------------------------
# Each returns (json_obj, csv_text).


def cmd_loss(a):
    if not (0.0 < a.p <= 1.0):
        raise UsageError(f"--p must lie in (0, 1], got {a.p}")
    interior = a.p < 1.0
    rec = {
        "gamma": a.gamma,
        "p": a.p,
        "loss": focal_loss(a.gamma, a.p),
        "d1": focal_loss_d1(a.gamma, a.p) if interior else None,
        "d2": focal_loss_d2(a.gamma, a.p) if interior else None,
        "phi": phi(a.gamma, a.p) if interior else None,
        "kappa": kappa(a.p) if interior else None,
    }
    return rec, _record_csv(rec)


def cmd_entropy(a):
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    q = _load_pmf(a.q, a.q_file, "--q")
    d1, d2 = focal_entropy_dgamma(a.gamma, p, q)
    rec = {
        "gamma": a.gamma,
        "shannon_p": shannon_entropy(p),
        "cross_entropy": cross_entropy(p, q),
        "focal_entropy": focal_entropy(a.gamma, p, q),
        "kl": kl_divergence(p, q),
        "h_gamma_q": h_gamma(a.gamma, q),
        "dgamma_first": d1,
        "dgamma_second": d2,
    }
    if math.isfinite(rec["cross_entropy"]):
        rec["rho"] = rho_and_r(a.gamma, p, q).rho
    return rec, _record_csv(rec)


def cmd_minimize(a):
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    if a.method == "solve":
        res = solve_minimizer(a.gamma, p)
        obj, star = res.to_dict(), res.p_star
        obj["gamma"] = a.gamma
    else:
        star = brute_force_minimizer(a.gamma, p, mode=a.method, resolution=a.resolution)
        obj = {"gamma": a.gamma, "method": a.method, "p_star": star.to_dict()}
    rows = [(i, x, y) for i, (x, y) in enumerate(zip(p.probs, star.probs))]
    return obj, dump_csv(("index", "p", "p_star"), rows)


def cmd_analyze(a):
    rep = analyze(a.gamma, _load_pmf(a.pmf, a.pmf_file, "--pmf"))
    rows = [
        (i, x, y, d, t.value)
        for i, (x, y, d, t) in enumerate(zip(rep.p_sorted, rep.p_star_sorted, rep.d, rep.tags))
    ]
    return rep.to_dict(), dump_csv(("rank", "p", "p_star", "d", "tag"), rows)


def cmd_bounds(a):
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    rec = {"gamma": a.gamma, **dataclasses.asdict(alpha_bounds(a.gamma, p))}
    rec["alpha_star"] = solve_minimizer(a.gamma, p).alpha_star
    rec.update(sufficient_conditions(a.gamma, p).to_dict())
    return rec, _record_csv(rec)


def cmd_binary(a):
    if a.gamma == 0:
        raise UsageError("--gamma must be > 0 for binary")
    if not (0.0 < a.p <= 0.5):
        raise UsageError(f"--p must lie in (0, 0.5], got {a.p}")
    rec = binary_bounds(a.gamma, a.p).to_dict()
    return rec, _record_csv(rec)


def cmd_asymptote(a):
    if a.gamma == 0:
        raise UsageError("--gamma must be > 0 for asymptote")
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    exact = solve_minimizer(a.gamma, p).alpha_star
    approx = alpha_asymptotic(a.gamma, p)
    rec = {"gamma": a.gamma, "alpha_star": exact, "alpha_asymptotic": approx,
           "relative_error": abs(exact - approx) / exact}
    return rec, _record_csv(rec)


def cmd_recurse(a):
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    seq = [p] + recurse_minimizer(a.gamma, p, a.steps)
    header = ("step",) + tuple(f"p{i + 1}" for i in range(len(p)))
    rows = [(k, *pk.probs.tolist()) for k, pk in enumerate(seq)]
    obj = {"gamma": a.gamma, "steps": [pk.to_dict() for pk in seq]}
    return obj, dump_csv(header, rows)


def cmd_limit(a):
    p = _load_pmf(a.pmf, a.pmf_file, "--pmf")
    q = _load_pmf(a.q, a.q_file, "--q")
    if any(g <= 0 for g in a.gammas):
        raise UsageError("--gammas must all be > 0")
    series = limit_diagnostic(p, q, a.gammas)
    target = limit_target(p, q)
    obj = {"target": target, "series": [{"gamma": g, "value": v} for g, v in series]}
    return obj, dump_csv(("gamma", "value", "target"), [(g, v, target) for g, v in series])


def cmd_scan(a):
    if a.gamma == 0:
        raise UsageError("--gamma must be > 0 for scan")
    if a.resolution < 10:
        raise UsageError("--resolution must be >= 10")
    res = simplex_scan(a.gamma, a.resolution, jobs=a.jobs)
    obj = {
        "gamma": a.gamma,
        "resolution": a.resolution,
        "min_pmin_minus_pa": res.min_gap,
        "argmin": list(res.argmin),
        "min_d1": res.min_d1,
        "failures": [{"cell": list(c), "error": e} for c, e in res.failures],
        "rows": [dict(zip(("p1", "p2", "p3", "alpha_star", "p_gamma_a", "pmin_minus_pa"), r)) for r in res.rows],
    }
    return obj, res.to_csv()


def cmd_figure(a):
    if (a.number is None) == (a.name is None):
        raise UsageError("give exactly one of a figure number or --name")
    if a.name is None:
        try:
            name = figures.figure_name(a.number)
        except KeyError:
            raise UsageError(f"no figure numbered {a.number}; known: 3, 4, 5, 6, 7, 9, 10")
    else:
        name = a.name
    builder = figures.FIGURES[name][1]
    if name == "heatmap":
        header, rows = builder(gamma=a.gamma if a.gamma is not None else 1.0,
                               resolution=a.resolution, jobs=a.jobs)
    elif name == "binary" and a.p is not None:
        header, rows = builder(p=a.p)
    else:
        header, rows = builder()
    obj = {"figure": name, "columns": list(header), "rows": [list(r) for r in rows]}
    return obj, dump_csv(header, rows)


def _train_common(a, data, theory_source):
    cfg = TrainConfig(
        gamma=a.gamma,
        hidden_width=a.hidden,
        learning_rate=a.lr,
        batch_size=a.batch_size,
        epochs=a.epochs,
        seed=a.seed,
    )
    run = train_classifier(data, cfg)
    empirical = data.empirical_posterior()
    theory_emp = theory_table(a.gamma, empirical)
    obj = {
        "seed": a.seed,
        "config": dataclasses.asdict(cfg),
        "class_counts": data.class_counts.tolist(),
        "counts": data.counts.tolist(),
        "learned": run.posterior,
        "empirical": empirical,
        "theory_from_empirical": theory_emp,
        "gap_vs_theory_from_empirical": compare_posteriors(run.posterior, theory_emp, data.counts, a.min_count).max_abs_gap,
        "min_count": a.min_count,
        "loss_trajectory": run.loss_trajectory,
    }
    if theory_source is not None:
        theory_exact = theory_table(a.gamma, theory_source)
        obj["exact_posterior"] = theory_source
        obj["theory_from_exact"] = theory_exact
        obj["gap_vs_theory_from_exact"] = compare_posteriors(run.posterior, theory_exact, data.counts, a.min_count).max_abs_gap
    text = f"# seed={a.seed} gamma={fmt(a.gamma)}\n" + posterior_to_csv(run.posterior, data.counts)
    return obj, text


def cmd_train_synthetic(a):
    spec = SyntheticSpec(sample_count=a.samples, seed=a.seed)
    if a.samples < 1:
        raise UsageError("--samples must be >= 1")
    return _train_common(a, sample_synthetic(spec), synthetic_posterior(spec))


def cmd_train_mnist(a):
    try:
        data = ingest_mnist(a.images, a.labels)
    except (OSError, IdxFormatError) as exc:
        raise UsageError(f"--images/--labels: {exc}")
    return _train_common(a, data, None)


# -- parser -------------------------------------------------------------------------


FIGURE_HELP = "figure CSV columns:\n" + "\n".join(
    f"  {name} ({', '.join(str(n) for n in nums)}): {cols}" for name, (nums, _, cols) in figures.FIGURES.items()
)


def _add_io(sp, default_format):
    sp.add_argument("--output", "--out", dest="output", default=None, help="write here instead of stdout")
    sp.add_argument("--format", choices=("csv", "json"), default=default_format)


def _add_pmf(sp, flag="--pmf", dest="pmf"):
    sp.add_argument(flag, dest=dest, type=_prob_list, default=None, help="comma-separated probabilities")
    sp.add_argument(f"{flag}-file", dest=f"{dest}_file", default=None, help='JSON {"labels": [...], "probs": [...]}')


def _add_train(sp):
    sp.add_argument("--gamma", type=_gamma, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--epochs", type=_positive_int, default=30)
    sp.add_argument("--batch-size", type=_positive_int, default=64)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--hidden", type=_positive_int, default=64)
    sp.add_argument("--min-count", type=int, default=100, help="cells below this count are left out of gaps")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="focal-entropy", description="Focal-entropy calculus and figure data.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("loss", help="focal loss and derivatives at a point")
    sp.add_argument("--gamma", type=_gamma, required=True)
    sp.add_argument("--p", type=float, required=True)
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_loss)

    sp = sub.add_parser("entropy", help="entropies and divergences of P and Q")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    _add_pmf(sp, "--q", "q")
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("minimize", help="focal-entropy minimizer")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    sp.add_argument("--method", choices=("solve", "descent", "grid"), default="solve")
    sp.add_argument("--resolution", type=_positive_int, default=200, help="lattice size for --method grid")
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_minimize)

    sp = sub.add_parser("analyze", help="gap signs and regime tags")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("bounds", help="alpha brackets and sufficient conditions")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("binary", help="two-point envelope")
    sp.add_argument("--gamma", type=_gamma, required=True)
    sp.add_argument("--p", type=float, required=True)
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_binary)

    sp = sub.add_parser("asymptote", help="exact vs large-gamma alpha")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    _add_io(sp, "json")
    sp.set_defaults(func=cmd_asymptote)

    sp = sub.add_parser("recurse", help="repeated application of the minimizer")
    sp.add_argument("--gamma", type=_gamma, required=True)
    _add_pmf(sp)
    sp.add_argument("--steps", type=_positive_int, default=3)
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_recurse)

    sp = sub.add_parser("limit", help="H_gamma^(1/gamma) over a gamma list")
    _add_pmf(sp)
    _add_pmf(sp, "--q", "q")
    sp.add_argument("--gammas", type=_float_list, required=True)
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_limit)

    sp = sub.add_parser("scan", help="ternary simplex scan of p_min - p_a")
    sp.add_argument("--gamma", type=_gamma, required=True)
    sp.add_argument("--resolution", type=int, default=60)
    sp.add_argument("--jobs", type=_positive_int, default=1)
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser(
        "figure",
        help="data behind a figure",
        epilog=FIGURE_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sp.add_argument("number", nargs="?", type=int, default=None)
    sp.add_argument("--name", choices=tuple(figures.FIGURES), default=None)
    sp.add_argument("--gamma", type=_gamma, default=None, help="heatmap only (default 1)")
    sp.add_argument("--resolution", type=int, default=60, help="heatmap only")
    sp.add_argument("--jobs", type=_positive_int, default=1, help="heatmap only")
    sp.add_argument("--p", type=float, default=None, help="binary only (default 0.05)")
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("train-synthetic", help="train on the synthetic two-feature task")
    _add_train(sp)
    sp.add_argument("--samples", type=int, default=10000)
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_train_synthetic)

    sp = sub.add_parser("train-mnist", help="train on binned MNIST features")
    _add_train(sp)
    sp.add_argument("--images", required=True)
    sp.add_argument("--labels", required=True)
    _add_io(sp, "csv")
    sp.set_defaults(func=cmd_train_mnist)
    return parser


def _configure_logging():
    level = os.environ.get("FOCAL_LOG", "WARNING").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[Sequence[str]] = None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        obj, csv_text = args.func(args)
        text = dump_json(obj) if args.format == "json" else csv_text
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (DomainError, LabelMismatchError) as exc:
        sys.stderr.write(f"focal-entropy: {exc}\n")
        return EXIT_USAGE
    except ConvergenceError as exc:
        sys.stderr.write(dump_json(exc.to_dict()))
        return EXIT_NUMERIC
    except FloatingPointError as exc:
        sys.stderr.write(dump_json({"error": "FloatingPointError", "message": str(exc)}))
        return EXIT_NUMERIC
    if args.output:
        with open(args.output, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
