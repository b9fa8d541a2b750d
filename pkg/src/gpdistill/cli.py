"""``gpdistill`` command line.

Exit codes: 0 on success, 2 for bad arguments, configuration or input
files, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import harness, ops
from .errors import ContractError, NumericalError
from .io import load_model, save_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("gpdistill")


def _cmd_train(args) -> int:
    X, y = ops.read_table(args.data, args.target)
    model = ops.train_teacher(
        X, y, kernel=args.kernel, lengthscale=args.lengthscale, noise_variance=args.noise,
        steps=args.steps, learning_rate=args.lr, standardize=not args.no_standardize,
    )
    size = save_model(model, args.out)
    log.info("trained teacher: lml=%.6g kernel=%s (%d bytes)", model.lml, model.spec.to_dict(), size)
    return EXIT_OK


def _cmd_distill(args) -> int:
    teacher = load_model(args.model)
    model = ops.distill_teacher(
        teacher, m=args.m, b=args.b, mode=args.mode, eta=args.eta, iterations=args.iters,
        line_search=not args.no_line_search, seed=args.seed,
    )
    if args.log:
        harness.write_csv(args.log, {
            "iteration": [r.iteration for r in model.trace],
            "objective": [r.objective for r in model.trace],
            "step_size": [r.step_size for r in model.trace],
        })
    size = save_model(model, args.out)
    log.info("distilled: objective %.6g -> %.6g (%d bytes)", model.trace[0].objective,
             model.trace[-1].objective, size)
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    X, _ = ops.read_table(args.data, args.target, d=ops.model_dim(model))
    mean, var, clamped = ops.predict_raw(model, X)
    harness.write_csv(args.out, {"mean": mean, "variance": var, "clamped": clamped})
    if clamped.any():
        log.warning("%d of %d variances were negative and clamped to 0", int(clamped.sum()), len(clamped))
    return EXIT_OK


def _cmd_experiment(args) -> int:
    name = args.command.replace("-", "_")
    if args.config:
        cfg = harness.RunConfig.from_file(args.config, experiment=name, seed=args.seed)
    else:
        cfg = harness.RunConfig(name, seed=args.seed if args.seed is not None else 0)
    report = harness.run(cfg)
    for path in report.write(args.out):
        log.info("wrote %s", path)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gpdistill", description="Exact GP training, kernel distillation and benchmarks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=None if fn is _cmd_experiment else 0)
        sp.set_defaults(func=fn)
        return sp

    sp = add("train", _cmd_train, "train an exact GP teacher on a CSV file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kernel", choices=["rbf", "ard"], default="rbf")
    sp.add_argument("--lengthscale", type=float, default=1.0)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--no-standardize", action="store_true")

    sp = add("distill", _cmd_distill, "distill a teacher into a sparse student bundle")
    sp.add_argument("--model", required=True)
    sp.add_argument("--m", type=int, default=100)
    sp.add_argument("--b", type=int, default=10)
    sp.add_argument("--mode", choices=["analytic", "paper"], default="analytic")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--iters", type=int, default=100)
    sp.add_argument("--no-line-search", action="store_true")
    sp.add_argument("--log", help="write the iteration log to this CSV file")
    sp.add_argument("--out", required=True)

    sp = add("predict", _cmd_predict, "predict mean and variance for the rows of a CSV file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--target", help="column to drop before predicting")
    sp.add_argument("--out", required=True)

    for name in ("bench", "reconstruct", "toy1d", "sweep-b"):
        sp = add(name, _cmd_experiment, f"run the {name} experiment")
        sp.add_argument("--config")
        sp.add_argument("--out", required=True)

    sp = add("serve", _cmd_serve, "run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ContractError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
