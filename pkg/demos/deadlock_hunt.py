"""Random runs versus exhaustive exploration on a small protocol deadlock.

B greets A every time it (re)boots.  If A starts a request before reading
the greeting, A waits behind it forever while B waits for A.  Random runs
run into this at varying depths, and a long trace is a poor explanation.
Exploration proves it is the only deadlock and gives a shortest witness.

    python3 demos/deadlock_hunt.py
"""
from pathlib import Path

from iotforge import explore, parse_file, replay, run_random

MODEL = Path(__file__).resolve().parent.parent / "fixtures" / "mutual_wait.iot"


def main():
    model = parse_file(MODEL)

    depths = []
    for seed in range(20):
        trace = run_random(model, steps=30, seed=seed)
        if trace.reason == "deadlock-or-quiescence" and not trace.final.quiet:
            depths.append(len(trace.moves))
    print(f"random runs that got stuck: {len(depths)} of 20, after {min(depths)} to {max(depths)} steps")

    report = explore(model, queue_bound=2)
    print(f"\nexhaustive search: {report.reachable_configs} configurations")
    for d in report.deadlocks:
        print(f"deadlock {d.digest}: {d.config.describe()}")
        for k, m in enumerate(d.witness, 1):
            print(f"  step {k}: {m.describe()}")
        assert replay(model, d.witness, queue_bound=2) == d.config
        print("  (witness replays to the same configuration)")


if __name__ == "__main__":
    main()
