"""From a textual model to ThingML: the whole pipeline on the smart-home fixture.

    python3 demos/smarthome_walkthrough.py [OUT_DIR]
"""
import sys
import tempfile
from pathlib import Path

from iotforge import (
    analyze_processor,
    emit,
    explore,
    map_model,
    mapping_coverage,
    parse_file,
    run_random,
    validate,
)

MODEL = Path(__file__).resolve().parent.parent / "fixtures" / "smarthome.iot"


def main(out_dir=None):
    model = parse_file(MODEL)
    print(f"parsed {model.name}: {len(model.software)} components, {len(model.hardware)} processors")

    diags = validate(model, str(MODEL))
    print(f"validation: {len(diags)} diagnostics")

    # Each processor is analysed on its own; MCU2 has two cores.
    for proc in model.hardware:
        report = analyze_processor(model, proc.name)
        print(f"\n{proc.name}: {report.verdict}")
        for r in report.results:
            print(f"  {r.task.label:<20} R = {r.response_time} us  (deadline {r.task.deadline} us)")

    # A short random run, then the full reachable state space.
    trace = run_random(model, steps=8, seed=1)
    print("\nrandom run, seed 1:")
    print(trace.format(), end="")

    report = explore(model, queue_bound=2)
    print(f"\nexploration at queue bound 2: {report.reachable_configs} configurations, "
          f"{len(report.deadlocks)} deadlocks, {len(report.overflows)} overflows")
    if report.overflows:
        worst = report.overflows[0]
        print(f"  the sensor can outrun the thermostat ({len(worst.witness)} steps):")
        for m in worst.witness:
            print("   ", m.describe())

    print("\nmapping coverage:")
    print(mapping_coverage(model).format(), end="")

    out = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="smarthome-"))
    for rel, text in emit(map_model(model)):
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        print(f"wrote {path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
