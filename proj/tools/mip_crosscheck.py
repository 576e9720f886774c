#!/usr/bin/env python3
"""Solve an emitted model with HiGHS and print the optimum.

Usage: mip_crosscheck.py MODEL [--time-limit S]

Prints "status <name>" and "objective <value>". Exit code 3 when highspy is
not importable, 1 on solver failure.
"""
import argparse
import sys


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("model")
    ap.add_argument("--time-limit", type=float, default=60.0)
    args = ap.parse_args()
    try:
        import highspy
    except ImportError:
        print("highspy unavailable", file=sys.stderr)
        return 3

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    if h.readModel(args.model) != highspy.HighsStatus.kOk:
        print("cannot read model", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    name = h.modelStatusToString(status)
    print("status", name.replace(" ", "_").lower())
    if status != highspy.HighsModelStatus.kOptimal:
        return 1
    print("objective", repr(h.getInfo().objective_function_value))
    return 0


if __name__ == "__main__":
    sys.exit(main())
