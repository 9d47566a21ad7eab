"""Command-line entry point: run <config>, selftest, compare <a> <b> <tolspec>."""

from __future__ import annotations

import argparse
import json
import sys

from .harness import ExperimentConfig, compare, load_config, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fkpf",
        description="Path-integral Monte Carlo engine with an "
        "exact-diagonalization oracle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", help="path to a JSON experiment config")
    p_run.add_argument("--output-dir", default=None)

    p_self = sub.add_parser("selftest", help="run the acceptance criteria")
    p_self.add_argument("--config", default=None,
                        help="optional selftest config (scale, criteria, seed)")
    p_self.add_argument("--output-dir", default="selftest_out")

    p_cmp = sub.add_parser("compare", help="compare two results files")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("tolspec", help="JSON tolerance spec or path to one")

    args = parser.parse_args(argv)

    if args.command == "run":
        config = load_config(args.config)
        manifest = run(config, output_dir=args.output_dir)
        print(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))
        if config.experiment == "selftest":
            return 0 if all(manifest.criteria.values()) else 1
        return 0

    if args.command == "selftest":
        if args.config:
            config = load_config(args.config)
        else:
            from .acceptance import DEFAULT_SEED

            config = ExperimentConfig(
                {"experiment": "selftest", "seed": DEFAULT_SEED}
            )
        manifest = run(config, output_dir=args.output_dir)
        failed = [cid for cid, ok in manifest.criteria.items() if not ok]
        if failed:
            print(f"FAILED criteria: {', '.join(failed)}")
            return 1
        print("all acceptance criteria passed")
        return 0

    if args.command == "compare":
        spec = args.tolspec
        try:
            tol = json.loads(spec)
        except json.JSONDecodeError:
            with open(spec) as handle:
                tol = json.load(handle)
        report = compare(args.a, args.b, tol)
        print(json.dumps(report, indent=2, default=str))
        return 0 if report["passed"] else 1

    return 2


if __name__ == "__main__":
    sys.exit(main())
